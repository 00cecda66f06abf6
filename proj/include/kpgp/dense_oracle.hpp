#pragma once

#include "kpgp/matern.hpp"
#include "kpgp/mean_model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace kpgp {

/**
 * Floating-point type used internally by the dense reference computations.
 * Adaptive runs double and long double, estimates the long double error from
 * their difference scaled by the ratio of the two machine epsilons, and
 * repeats the computation in quad precision when that estimate is not small.
 */
enum class OraclePrecision { Double, LongDouble, Quad, Adaptive };

inline constexpr std::size_t kDenseOracleMaxPoints = 5000;

/**
 * Dense reference GP problem. `points` holds n points of dimension
 * kernel.dim() back to back; `beta` has one entry per regressor of `mean`.
 */
struct DenseGpProblem {
    ProductKernel kernel;
    std::vector<double> points;
    std::vector<double> y;
    MeanModel mean;
    std::vector<double> beta;
    double sigma2 = 1.0;
    double nugget_ratio = 0.0;
    OraclePrecision precision = OraclePrecision::Adaptive;
    bool allow_large = false; ///< lift the n <= kDenseOracleMaxPoints guard

    std::size_t size() const noexcept { return kernel.dim() == 0 ? 0 : points.size() / kernel.dim(); }
};

struct DensePrediction {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Posterior mean and latent-function variance at `xstars` (points back to back).
DensePrediction dense_predict(const DenseGpProblem& problem, std::span<const double> xstars);

/// Gaussian log density of y, including the -(n/2) log(2 pi) constant.
double dense_loglik(const DenseGpProblem& problem);

struct DenseProfile {
    std::vector<double> beta;
    double sigma2 = 0.0;
};

/// Generalized least squares beta and sigma2 = r^T (K + eta I)^{-1} r / n (problem.beta, sigma2 ignored).
DenseProfile dense_profile(const DenseGpProblem& problem);

/// (K + eta I)^{-1} v.
std::vector<double> dense_solve(const DenseGpProblem& problem, std::span<const double> v);

/// Correlation matrix K(points, points) in double precision, row-major.
std::vector<double> dense_correlation(const ProductKernel& kernel, std::span<const double> points);

} // namespace kpgp
