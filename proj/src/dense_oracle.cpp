#include "kpgp/dense_oracle.hpp"

#include "kpgp/error.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kpgp {

namespace {

using boost::multiprecision::float128;

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
T factorial_t(int n) {
    T f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Textbook half-integer Matern correlation, evaluated entirely in T.
template <class T>
class MaternT {
public:
    MaternT(int p, double omega) : p_(p) {
        using std::sqrt;
        c_ = sqrt(T(2 * p + 1)) / T(omega);
        coef_.resize(p + 1);
        const T lead = factorial_t<T>(p) / factorial_t<T>(2 * p);
        for (int j = 0; j <= p; ++j) {
            T two_c_pow = 1;
            for (int t = 0; t < p - j; ++t) two_c_pow *= 2 * c_;
            coef_[p - j] = lead * factorial_t<T>(p + j) / (factorial_t<T>(j) * factorial_t<T>(p - j)) * two_c_pow;
        }
    }

    T operator()(T r) const {
        using std::abs;
        using std::exp;
        r = abs(r);
        T poly = coef_[p_];
        for (int i = p_ - 1; i >= 0; --i) poly = poly * r + coef_[i];
        return poly * exp(-c_ * r);
    }

private:
    int p_;
    T c_;
    std::vector<T> coef_;
};

template <class T>
struct Setup {
    std::size_t n = 0, d = 0;
    std::vector<MaternT<T>> factors;
    Mat<T> f;      // n x q regressors
    Vec<T> y;
    Eigen::LLT<Mat<T>> llt;

    T corr(const double* x, const double* z) const {
        T v = 1;
        for (std::size_t j = 0; j < d; ++j) v *= factors[j](T(x[j]) - T(z[j]));
        return v;
    }
};

std::size_t checked_size(const DenseGpProblem& pr) {
    const std::size_t d = pr.kernel.dim();
    if (pr.points.size() % d != 0) fail(ErrorKind::Parameter, "point buffer length is not a multiple of the dimension");
    const std::size_t n = pr.points.size() / d;
    if (n == 0) fail(ErrorKind::InsufficientData, "dense oracle needs at least one point");
    if (n > kDenseOracleMaxPoints && !pr.allow_large)
        fail(ErrorKind::Parameter, "dense oracle limited to " + std::to_string(kDenseOracleMaxPoints) +
                                       " points without override, got " + std::to_string(n));
    if (pr.y.size() != n)
        fail(ErrorKind::Data, "expected " + std::to_string(n) + " observations, got " + std::to_string(pr.y.size()));
    if (!(pr.nugget_ratio >= 0.0)) fail(ErrorKind::Parameter, "nugget ratio must be nonnegative");
    if (!(pr.sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
    return n;
}

template <class T>
Setup<T> prepare(const DenseGpProblem& pr) {
    Setup<T> s;
    s.n = checked_size(pr);
    s.d = pr.kernel.dim();
    for (const auto& fac : pr.kernel.factors()) s.factors.emplace_back(fac.p(), fac.omega());
    const Eigen::MatrixXd fd = pr.mean.design(pr.points, s.d);
    s.f = fd.template cast<T>();
    s.y.resize(static_cast<Eigen::Index>(s.n));
    for (std::size_t i = 0; i < s.n; ++i) s.y(static_cast<Eigen::Index>(i)) = T(pr.y[i]);

    const auto ni = static_cast<Eigen::Index>(s.n);
    Mat<T> c(ni, ni);
    for (Eigen::Index i = 0; i < ni; ++i) {
        c(i, i) = T(1) + T(pr.nugget_ratio);
        for (Eigen::Index j = 0; j < i; ++j) {
            const T v = s.corr(&pr.points[static_cast<std::size_t>(i) * s.d], &pr.points[static_cast<std::size_t>(j) * s.d]);
            c(i, j) = v;
            c(j, i) = v;
        }
    }
    s.llt.compute(c);
    if (s.llt.info() != Eigen::Success)
        fail(ErrorKind::DegenerateDesign, "dense correlation matrix is not positive definite (duplicate points?)");
    return s;
}

template <class T>
Vec<T> residual(const Setup<T>& s, std::span<const double> beta) {
    if (beta.size() != static_cast<std::size_t>(s.f.cols()))
        fail(ErrorKind::Parameter, "expected " + std::to_string(s.f.cols()) + " mean coefficients");
    Vec<T> b(static_cast<Eigen::Index>(beta.size()));
    for (std::size_t i = 0; i < beta.size(); ++i) b(static_cast<Eigen::Index>(i)) = T(beta[i]);
    return s.y - s.f * b;
}

template <class T>
DensePrediction predict_impl(const DenseGpProblem& pr, std::span<const double> xstars) {
    const Setup<T> s = prepare<T>(pr);
    if (xstars.size() % s.d != 0) fail(ErrorKind::Parameter, "prediction buffer length is not a multiple of the dimension");
    const std::size_t m = xstars.size() / s.d;
    const Vec<T> alpha = s.llt.solve(residual(s, pr.beta));

    const auto ni = static_cast<Eigen::Index>(s.n);
    const auto mi = static_cast<Eigen::Index>(m);
    Mat<T> kstar(ni, mi);
    for (Eigen::Index t = 0; t < mi; ++t)
        for (Eigen::Index i = 0; i < ni; ++i)
            kstar(i, t) = s.corr(&pr.points[static_cast<std::size_t>(i) * s.d], &xstars[static_cast<std::size_t>(t) * s.d]);
    const Mat<T> w = s.llt.matrixL().solve(kstar);

    DensePrediction out;
    out.mean.resize(m);
    out.variance.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const T mu = T(pr.mean.mean(xstars.subspan(t * s.d, s.d), pr.beta)) + kstar.col(ti).dot(alpha);
        const T var = T(pr.sigma2) * (T(1) - w.col(ti).squaredNorm());
        out.mean[t] = static_cast<double>(mu);
        out.variance[t] = static_cast<double>(var);
    }
    return out;
}

template <class T>
T logdet_of(const Setup<T>& s) {
    using std::log;
    T sum = 0;
    const auto& l = s.llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) sum += log(l(i, i));
    return 2 * sum;
}

template <class T>
double loglik_impl(const DenseGpProblem& pr) {
    using std::log;
    const Setup<T> s = prepare<T>(pr);
    const Vec<T> r = residual(s, pr.beta);
    const T quad = r.dot(s.llt.solve(r));
    const T n = T(s.n);
    const T two_pi = 2 * boost::math::constants::pi<T>();
    return static_cast<double>(-(n * log(T(pr.sigma2)) + logdet_of(s) + quad / T(pr.sigma2) + n * log(two_pi)) / 2);
}

template <class T>
DenseProfile profile_impl(const DenseGpProblem& pr) {
    const Setup<T> s = prepare<T>(pr);
    DenseProfile out;
    Vec<T> beta = Vec<T>::Zero(s.f.cols());
    if (s.f.cols() > 0) {
        const Mat<T> cf = s.llt.solve(s.f);
        const Mat<T> g = s.f.transpose() * cf;
        const Vec<T> b = cf.transpose() * s.y;
        Eigen::LDLT<Mat<T>> ldlt(g);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            fail(ErrorKind::CollinearRegressors, "regressor Gram matrix is singular");
        beta = ldlt.solve(b);
    }
    for (Eigen::Index i = 0; i < beta.size(); ++i) out.beta.push_back(static_cast<double>(beta(i)));
    const Vec<T> r = s.y - s.f * beta;
    out.sigma2 = static_cast<double>(r.dot(s.llt.solve(r)) / T(s.n));
    return out;
}

template <class T>
std::vector<double> solve_impl(const DenseGpProblem& pr, std::span<const double> v) {
    const Setup<T> s = prepare<T>(pr);
    if (v.size() != s.n) fail(ErrorKind::Parameter, "right-hand side length mismatch");
    Vec<T> rhs(static_cast<Eigen::Index>(s.n));
    for (std::size_t i = 0; i < s.n; ++i) rhs(static_cast<Eigen::Index>(i)) = T(v[i]);
    const Vec<T> x = s.llt.solve(rhs);
    std::vector<double> out(s.n);
    for (std::size_t i = 0; i < s.n; ++i) out[i] = static_cast<double>(x(static_cast<Eigen::Index>(i)));
    return out;
}

// Long double error is about the double error times this ratio.
constexpr double kEpsilonRatio = static_cast<double>(std::numeric_limits<long double>::epsilon()) /
                                 std::numeric_limits<double>::epsilon();
// Quad is used when the estimated long double error exceeds this, relative to the result scale.
constexpr double kAdaptiveTolerance = 1e-12;

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool close_enough(std::span<const double> lo, std::span<const double> hi, double scale) {
    return max_abs_diff(lo, hi) * kEpsilonRatio <= kAdaptiveTolerance * std::max(scale, 1.0);
}

bool close_enough(const DensePrediction& lo, const DensePrediction& hi) {
    return close_enough(lo.mean, hi.mean, max_abs(hi.mean)) && close_enough(lo.variance, hi.variance, 1.0);
}

bool close_enough(double lo, double hi) { return close_enough({&lo, 1}, {&hi, 1}, std::fabs(hi)); }

bool close_enough(const std::vector<double>& lo, const std::vector<double>& hi) {
    return close_enough(std::span<const double>(lo), hi, max_abs(hi));
}

bool close_enough(const DenseProfile& lo, const DenseProfile& hi) {
    return close_enough(lo.beta, hi.beta, max_abs(hi.beta)) && close_enough(lo.sigma2, hi.sigma2);
}

template <class F>
auto dispatch(OraclePrecision precision, F&& f) {
    switch (precision) {
    case OraclePrecision::Double: return f(double{});
    case OraclePrecision::LongDouble: return f((long double){});
    case OraclePrecision::Quad: return f(float128{});
    case OraclePrecision::Adaptive: break;
    }
    // the narrower types break down first on nearly singular systems
    try {
        auto hi = f((long double){});
        try {
            if (close_enough(f(double{}), hi)) return hi;
        } catch (const Error&) {
        }
    } catch (const Error&) {
    }
    return f(float128{});
}

} // namespace

DensePrediction dense_predict(const DenseGpProblem& problem, std::span<const double> xstars) {
    return dispatch(problem.precision, [&](auto tag) { return predict_impl<decltype(tag)>(problem, xstars); });
}

double dense_loglik(const DenseGpProblem& problem) {
    return dispatch(problem.precision, [&](auto tag) { return loglik_impl<decltype(tag)>(problem); });
}

DenseProfile dense_profile(const DenseGpProblem& problem) {
    return dispatch(problem.precision, [&](auto tag) { return profile_impl<decltype(tag)>(problem); });
}

std::vector<double> dense_solve(const DenseGpProblem& problem, std::span<const double> v) {
    return dispatch(problem.precision, [&](auto tag) { return solve_impl<decltype(tag)>(problem, v); });
}

std::vector<double> dense_correlation(const ProductKernel& kernel, std::span<const double> points) {
    const std::size_t d = kernel.dim();
    const std::size_t n = points.size() / d;
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] = product_correlation(kernel, points.subspan(i * d, d), points.subspan(j * d, d));
    return k;
}

} // namespace kpgp
