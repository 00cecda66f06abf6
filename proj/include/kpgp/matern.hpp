#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kpgp {

/**
 * Evaluation of a half-integer Matern correlation in floating-point type T.
 * Instantiated for double, long double and the library's quad type.
 */
template <class T>
class MaternEvaluator {
public:
    MaternEvaluator() = default;
    MaternEvaluator(int p, double omega);

    const T& c() const noexcept { return c_; }

    /// K(r) for any real r (symmetric in r).
    T at_distance(const T& r) const;

    /// (g(r) - g(-r)) / 2 for g(r) = P_p(r) exp(-c r), via its Taylor series near 0.
    T odd_part(const T& r) const;

    /// Coefficients of P_p in increasing powers of r.
    const std::vector<T>& polynomial() const noexcept { return poly_; }

private:
    int p_ = 0;
    T c_{};
    T series_radius_{}; // |r| below which odd_part uses the series
    std::vector<T> poly_;
    std::vector<T> odd_series_; // coefficients of r^(2p+1+2t)
};

/**
 * Matérn correlation with half-integer smoothness nu = p + 1/2.
 *
 * Evaluated through the closed polynomial-times-exponential form
 *
 *     K(r) = P_p(r) exp(-c r),   c = sqrt(2 nu) / omega,
 *     P_p(r) = p!/(2p)! * sum_{j=0}^{p} (p+j)! / (j! (p-j)!) * (2 c r)^(p-j),
 *
 * normalized so that K(0) = 1. The integer parameter makes non-half-integer
 * smoothness unrepresentable.
 */
class HalfIntegerMatern {
public:
    HalfIntegerMatern(int p, double omega);

    int p() const noexcept { return p_; }
    double omega() const noexcept { return omega_; }
    double nu() const noexcept { return p_ + 0.5; }
    double c() const noexcept { return c_; }

    /// Kernel packet degree k = 2 nu + 2 = 2p + 3.
    int degree() const noexcept { return 2 * p_ + 3; }

    /// Half band of a kernel packet, (k - 1) / 2 = p + 1.
    int half_width() const noexcept { return p_ + 1; }

    /// K as a function of the distance r >= 0.
    double at_distance(double r) const noexcept;

    double operator()(double x, double y) const noexcept;

    /// Odd part of the analytic continuation g(r) = P_p(r) exp(-c r):
    /// (g(r) - g(-r)) / 2. Accurate near r = 0, where it behaves like r^(2p+1).
    double odd_part(double r) const noexcept;

    /// Coefficients of P_p in increasing powers of r.
    std::span<const double> polynomial() const noexcept { return eval_.polynomial(); }

    const MaternEvaluator<double>& evaluator() const noexcept { return eval_; }

private:
    int p_;
    double omega_;
    double c_;
    MaternEvaluator<double> eval_;
};

HalfIntegerMatern make_kernel(int p, double omega);

double correlation(const HalfIntegerMatern& kern, double x, double y) noexcept;

/// Separable correlation over d input dimensions.
class ProductKernel {
public:
    explicit ProductKernel(std::vector<HalfIntegerMatern> factors);

    /// Same kernel in every one of `dim` dimensions.
    static ProductKernel isotropic(std::size_t dim, int p, double omega);

    std::size_t dim() const noexcept { return factors_.size(); }
    const HalfIntegerMatern& factor(std::size_t j) const { return factors_.at(j); }
    const std::vector<HalfIntegerMatern>& factors() const noexcept { return factors_; }

private:
    std::vector<HalfIntegerMatern> factors_;
};

double product_correlation(const ProductKernel& pk, std::span<const double> x,
                           std::span<const double> y);

} // namespace kpgp
