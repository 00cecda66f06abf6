#include "kpgp/matern.hpp"

#include "detail/scalar.hpp"
#include "kpgp/error.hpp"

#include <cmath>
#include <string>

namespace kpgp {

namespace {

constexpr double kOddSeriesRadius = 2.0; // in units of c * r

template <class T>
T factorial(int n) {
    T f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

} // namespace

template <class T>
MaternEvaluator<T>::MaternEvaluator(int p, double omega) : p_(p) {
    using std::pow;
    using std::sqrt;
    c_ = sqrt(T(2 * p + 1)) / T(omega);
    series_radius_ = T(kOddSeriesRadius) / c_;

    // pi_i = P_i / c^i depends on p only
    std::vector<T> pi(p + 1);
    const T lead = factorial<T>(p) / factorial<T>(2 * p);
    for (int i = 0; i <= p; ++i) {
        T two_pow = 1;
        for (int t = 0; t < i; ++t) two_pow *= 2;
        pi[i] = lead * factorial<T>(2 * p - i) / (factorial<T>(i) * factorial<T>(p - i)) * two_pow;
    }
    pi[0] = T(1); // K(0) = 1 exactly
    poly_.resize(p + 1);
    T c_pow = 1;
    for (int i = 0; i <= p; ++i) {
        poly_[i] = pi[i] * c_pow;
        c_pow *= c_;
    }

    // Odd Taylor coefficients of g(r) = P(r) exp(-c r); the ones below 2p+1
    // vanish. In z = c r the n-th coefficient is rho_n; terms are kept until
    // rho_n * R^n drops below epsilon relative to the leading one at the radius R.
    using std::abs;
    const T tiny = detail::epsilon<T>() * T(1e-3);
    T leading = 0;
    for (int t = 0; t < 200; ++t) {
        const int n = 2 * p + 1 + 2 * t;
        T rho = 0;
        for (int i = 0; i <= p; ++i) {
            const T term = pi[i] / factorial<T>(n - i);
            rho += ((n - i) % 2 == 0) ? term : T(-term);
        }
        odd_series_.push_back(rho * pow(c_, n));
        const T at_radius = abs(rho) * pow(T(kOddSeriesRadius), n);
        if (t == 0) leading = at_radius;
        if (t > 2 && at_radius < tiny * leading) break;
    }
}

template <class T>
T MaternEvaluator<T>::at_distance(const T& r0) const {
    using std::abs;
    using std::exp;
    const T r = abs(r0);
    T poly = poly_[p_];
    for (int i = p_ - 1; i >= 0; --i) poly = poly * r + poly_[i];
    return poly * exp(-c_ * r);
}

template <class T>
T MaternEvaluator<T>::odd_part(const T& r) const {
    using std::abs;
    using std::exp;
    if (abs(r) <= series_radius_) {
        const T r2 = r * r;
        T sum = 0;
        for (std::size_t t = odd_series_.size(); t-- > 0;) sum = sum * r2 + odd_series_[t];
        T lead = r;
        for (int i = 0; i < 2 * p_; ++i) lead *= r;
        return sum * lead;
    }
    T forward = poly_[p_];
    T backward = poly_[p_];
    for (int i = p_ - 1; i >= 0; --i) {
        forward = forward * r + poly_[i];
        backward = backward * (-r) + poly_[i];
    }
    return (forward * exp(-c_ * r) - backward * exp(c_ * r)) / 2;
}

#define KPGP_INSTANTIATE(T) template class MaternEvaluator<T>;
KPGP_FOR_EACH_SCALAR(KPGP_INSTANTIATE)
#undef KPGP_INSTANTIATE

HalfIntegerMatern::HalfIntegerMatern(int p, double omega) : p_(p), omega_(omega) {
    if (p < 0) fail(ErrorKind::Parameter, "smoothness index p must be nonnegative");
    if (p > 20) fail(ErrorKind::Parameter, "smoothness index p > 20 is not supported");
    if (!(omega > 0.0) || !std::isfinite(omega))
        fail(ErrorKind::Parameter, "scale omega must be positive and finite, got " + std::to_string(omega));
    c_ = std::sqrt(2.0 * p + 1.0) / omega;
    eval_ = MaternEvaluator<double>(p, omega);
}

double HalfIntegerMatern::at_distance(double r) const noexcept { return eval_.at_distance(r); }

double HalfIntegerMatern::operator()(double x, double y) const noexcept { return eval_.at_distance(x - y); }

double HalfIntegerMatern::odd_part(double r) const noexcept { return eval_.odd_part(r); }

HalfIntegerMatern make_kernel(int p, double omega) { return HalfIntegerMatern(p, omega); }

double correlation(const HalfIntegerMatern& kern, double x, double y) noexcept { return kern(x, y); }

ProductKernel::ProductKernel(std::vector<HalfIntegerMatern> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) fail(ErrorKind::Parameter, "product kernel needs at least one factor");
}

ProductKernel ProductKernel::isotropic(std::size_t dim, int p, double omega) {
    return ProductKernel(std::vector<HalfIntegerMatern>(dim, HalfIntegerMatern(p, omega)));
}

double product_correlation(const ProductKernel& pk, std::span<const double> x, std::span<const double> y) {
    if (x.size() != pk.dim() || y.size() != pk.dim())
        fail(ErrorKind::Parameter, "point dimension does not match product kernel dimension " +
                                       std::to_string(pk.dim()));
    double value = 1.0;
    for (std::size_t j = 0; j < pk.dim(); ++j) value *= pk.factor(j)(x[j], y[j]);
    return value;
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::DegenerateDesign: return "degenerate design";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Conditioning: return "conditioning error";
    case ErrorKind::SingularMatrix: return "singular matrix";
    case ErrorKind::NumericalBreakdown: return "numerical breakdown";
    case ErrorKind::CollinearRegressors: return "collinear regressors";
    case ErrorKind::OptimizationFailure: return "optimization failure";
    case ErrorKind::Design: return "design error";
    case ErrorKind::Data: return "data error";
    }
    return "error";
}

} // namespace kpgp
