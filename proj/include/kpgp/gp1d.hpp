#pragma once

#include "kpgp/matern.hpp"
#include "kpgp/mean_model.hpp"
#include "kpgp/precision.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace kpgp {

namespace detail {
class Gp1dState;
}

struct FitOptions {
    std::optional<std::vector<double>> beta; ///< nullopt: generalized least squares estimate
    std::optional<double> sigma2;            ///< nullopt: profile estimate r^T K_eta^{-1} r / n
    double nugget_ratio = 0.0;               ///< eta = sigma_Y^2 / sigma^2
    Precision precision = Precision::Auto;
};

/// Fitted one-dimensional model, M = Phi + eta A factorized once.
class Gp1dModel {
public:
    const HalfIntegerMatern& kernel() const noexcept { return kernel_; }
    std::span<const double> knots() const noexcept { return knots_; }
    const MeanModel& mean_model() const noexcept { return mean_; }
    const Eigen::MatrixXd& mean_design() const noexcept { return design_; }
    std::span<const double> y() const noexcept { return y_; }
    std::span<const double> beta() const noexcept { return beta_; }
    double sigma2() const noexcept { return sigma2_; }
    double nugget_ratio() const noexcept { return nugget_; }
    /// Working precision actually used.
    Precision precision() const noexcept { return precision_; }
    /// s = M^{-1} (Y - F beta), rounded to double.
    std::span<const double> solve_vector() const noexcept { return s_; }
    /// Bytes held by the basis, the factorization and the solve vector.
    std::size_t storage_bytes() const noexcept;

private:
    friend Gp1dModel fit_1d(const HalfIntegerMatern&, std::vector<double>, std::vector<double>, const MeanModel&,
                            const FitOptions&);
    friend std::vector<double> predict_mean(const Gp1dModel&, std::span<const double>, bool);
    friend std::vector<double> predict_variance(const Gp1dModel&, std::span<const double>);

    explicit Gp1dModel(const HalfIntegerMatern& kern) : kernel_(kern) {}

    HalfIntegerMatern kernel_;
    std::vector<double> knots_;
    MeanModel mean_;
    Eigen::MatrixXd design_;
    std::vector<double> y_;
    std::vector<double> beta_;
    double sigma2_ = 1.0;
    double nugget_ = 0.0;
    Precision precision_ = Precision::Double;
    std::vector<double> s_;
    std::shared_ptr<const detail::Gp1dState> state_;
};

Gp1dModel fit_1d(const HalfIntegerMatern& kern, std::vector<double> knots, std::vector<double> y,
                 const MeanModel& mean, const FitOptions& options = {});

/// Posterior mean; with `sorted_hint` the located interval of each point seeds the next search.
std::vector<double> predict_mean(const Gp1dModel& model, std::span<const double> xstars, bool sorted_hint = false);

/// Posterior variance of the latent function (observation noise excluded).
std::vector<double> predict_variance(const Gp1dModel& model, std::span<const double> xstars);

struct LogLikTerms {
    double value = 0.0;
    double logdet_m = 0.0;  ///< log|det(Phi + eta A)|
    double logdet_a = 0.0;  ///< log|det A|
    double quadratic = 0.0; ///< r^T A M^{-1} r, without the 1/sigma2 factor
};

/// Gaussian log density of y with covariance sigma2 (K + eta I), including the 2 pi constant.
LogLikTerms log_likelihood_1d(const HalfIntegerMatern& kern, std::vector<double> knots, std::span<const double> y,
                              const MeanModel& mean, std::span<const double> beta, double sigma2,
                              double nugget_ratio, Precision precision = Precision::Auto);

struct MleOptions {
    bool estimate_nugget = false;
    double nugget_ratio = 0.0;           ///< used when the nugget is not estimated
    std::optional<double> omega_lower;   ///< default 0.01 * range of the knots
    std::optional<double> omega_upper;   ///< default 10 * range of the knots
    double nugget_lower = 1e-8;
    double nugget_upper = 10.0;
    int starts = 5;
    double tolerance = 1e-6;             ///< on log parameters
    int max_iterations = 2000;
    std::uint64_t seed = 1;
    Precision precision = Precision::Auto;
};

struct MleResult {
    double omega_hat = 0.0;
    double sigma2_hat = 0.0;
    std::vector<double> beta_hat;
    std::optional<double> nugget_ratio_hat;
    double loglik_value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool boundary = false; ///< optimum on a search bound, or sigma2 estimate at its floor
};

/// Profile log likelihood at fixed (omega, eta) with beta and sigma2 at their closed-form maximizers.
struct ProfilePoint {
    double loglik = 0.0;
    double sigma2 = 0.0;
    std::vector<double> beta;
    bool sigma2_floored = false;
    LogLikTerms terms;
};

ProfilePoint profile_loglik_1d(int p, double omega, double nugget_ratio, std::span<const double> knots,
                               std::span<const double> y, const MeanModel& mean,
                               Precision precision = Precision::Auto);

MleResult profile_mle_1d(int p, std::span<const double> knots, std::span<const double> y, const MeanModel& mean,
                         const MleOptions& options = {});

/// Relative floor on the profiled sigma2, in units of the mean square of y.
inline constexpr double kSigma2Floor = 1e-12;

} // namespace kpgp
