#include "kpgp/gp1d.hpp"

#include "detail/dispatch.hpp"
#include "detail/gp1d_state.hpp"
#include "detail/scalar.hpp"
#include "detail/selected_inverse.hpp"
#include "kpgp/banded.hpp"
#include "kpgp/error.hpp"
#include "kpgp/kp_basis.hpp"
#include "kpgp/optimize.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>

namespace kpgp {

namespace {

constexpr double kVarianceClamp = 1e-10;

template <class T>
using Vec = std::vector<T>;

template <class T>
BasicBandedMatrix<T> system_matrix(const BasicKpBasis<T>& basis, double nugget_ratio) {
    if (nugget_ratio == 0.0) return basis.phi();
    return band_add_scaled(basis.phi(), basis.a(), T(nugget_ratio));
}

template <class T>
BasicBandedFactorization<T> factorize(const BasicBandedMatrix<T>& m, const char* what) {
    try {
        return band_lu(m);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularMatrix) throw;
        fail(ErrorKind::NumericalBreakdown, std::string(what) + " is singular");
    }
}

void check_nugget(double nugget_ratio) {
    if (!(nugget_ratio >= 0.0) || !std::isfinite(nugget_ratio))
        fail(ErrorKind::Parameter, "nugget ratio must be finite and nonnegative");
}

void check_observations(std::size_t n, std::span<const double> y) {
    if (y.size() != n)
        fail(ErrorKind::Data, "expected " + std::to_string(n) + " observations, got " + std::to_string(y.size()));
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::Data, "observations must be finite");
}

template <class T>
Vec<T> residual(std::span<const double> y, const Eigen::MatrixXd& f, std::span<const double> beta) {
    Vec<T> r(y.begin(), y.end());
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index q = 0; q < f.cols(); ++q)
            r[static_cast<std::size_t>(i)] -= T(f(i, q)) * T(beta[static_cast<std::size_t>(q)]);
    return r;
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// beta = (F^T K_eta^{-1} F)^{-1} F^T K_eta^{-1} y with K_eta^{-1} v = A M^{-1} v.
template <class T>
std::vector<double> gls_beta(const BasicKpBasis<T>& basis, const BasicBandedFactorization<T>& lu,
                             const Eigen::MatrixXd& f, std::span<const double> y) {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    const Eigen::Index q = f.cols();
    if (q == 0) return {};
    const std::size_t n = basis.size();
    Mat kinv_f(static_cast<Eigen::Index>(n), q);
    Vec<T> col(n);
    for (Eigen::Index c = 0; c < q; ++c) {
        for (std::size_t i = 0; i < n; ++i) col[i] = T(f(static_cast<Eigen::Index>(i), c));
        lu.solve_in_place(col);
        const Vec<T> w = band_matvec(basis.a(), col);
        for (std::size_t i = 0; i < n; ++i) kinv_f(static_cast<Eigen::Index>(i), c) = w[i];
    }
    const Mat ft = f.cast<T>().transpose();
    Mat gram = ft * kinv_f;
    gram = (T(0.5) * (gram + gram.transpose())).eval();
    Col yv(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) yv(static_cast<Eigen::Index>(i)) = T(y[i]);
    const Col rhs = kinv_f.transpose() * yv;

    const Eigen::MatrixXd gram_d = gram.unaryExpr([](const T& v) { return detail::to_double(v); });
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_d);
    const auto& ev = eig.eigenvalues();
    if (ev.size() > 0 && !(ev(0) > 1e-12 * std::fabs(ev(ev.size() - 1))))
        fail(ErrorKind::CollinearRegressors, "regressor Gram matrix F^T K^{-1} F is singular");
    const Col beta = gram.ldlt().solve(rhs);
    std::vector<double> out(static_cast<std::size_t>(beta.size()));
    for (Eigen::Index i = 0; i < beta.size(); ++i) out[static_cast<std::size_t>(i)] = detail::to_double(beta(i));
    return out;
}

template <class T>
constexpr Precision precision_of() {
    if constexpr (std::is_same_v<T, double>) return Precision::Double;
    else if constexpr (std::is_same_v<T, long double>) return Precision::LongDouble;
    else return Precision::Quad;
}

// phi(x)^T C^{-1} phi(x) from the band of C^{-1}, possibly in a wider type than the fit
class BandVariance {
public:
    virtual ~BandVariance() = default;
    virtual double quadratic(double x) const = 0;
    virtual std::size_t storage_bytes() const = 0;
};

template <class W>
class BandVarianceAs final : public BandVariance {
public:
    // `basis` must outlive the result unless ownership is passed in `own`
    static std::unique_ptr<const BandVariance> build(const BasicKpBasis<W>& basis,
                                                     std::unique_ptr<BasicKpBasis<W>> own, double nugget_ratio) {
        auto inv = detail::BandInverse<W>::build(basis.a(), system_matrix(basis, nugget_ratio),
                                                 static_cast<std::size_t>(basis.kernel().degree()));
        if (!inv) return nullptr;
        return std::unique_ptr<const BandVariance>(new BandVarianceAs(basis, std::move(own), std::move(*inv)));
    }

    double quadratic(double x) const override {
        return detail::to_double(inv_.quadratic(evaluate_basis_row(*basis_, x)));
    }

    std::size_t storage_bytes() const override {
        return inv_.storage_bytes() + (own_ ? own_->storage_bytes() : 0);
    }

private:
    BandVarianceAs(const BasicKpBasis<W>& basis, std::unique_ptr<BasicKpBasis<W>> own, detail::BandInverse<W> inv)
        : own_(std::move(own)), basis_(&basis), inv_(std::move(inv)) {}

    std::unique_ptr<BasicKpBasis<W>> own_;
    const BasicKpBasis<W>* basis_;
    detail::BandInverse<W> inv_;
};

template <class T>
class State final : public detail::Gp1dState {
public:
    State(BasicKpBasis<T> basis, BasicBandedFactorization<T> lu, Vec<T> s, double nugget_ratio)
        : basis_(std::move(basis)), lu_(std::move(lu)), s_(std::move(s)), nugget_(nugget_ratio) {}

    double correction(double x, std::optional<std::ptrdiff_t>& hint) const override {
        const BasicBasisRow<T> row = evaluate_basis_row(basis_, x, hint);
        hint = row.interval;
        T sum = 0;
        for (std::size_t w = 0; w < row.values.size(); ++w) sum += row.values[w] * s_[row.window_start + w];
        return detail::to_double(sum);
    }

    double explained(double x) const override {
        std::call_once(band_once_, [this] { band_ = make_band(); });
        if (band_) return band_->quadratic(x);

        // O(n) fallback: phi^T M^{-1} K(X, x) by a full solve
        const auto knots = basis_.knots();
        const std::size_t n = basis_.size();
        Vec<T> v(n);
        using std::abs;
        for (std::size_t i = 0; i < n; ++i) v[i] = basis_.evaluator().at_distance(abs(T(knots[i]) - T(x)));
        lu_.solve_in_place(v);
        const BasicBasisRow<T> row = evaluate_basis_row(basis_, x);
        T sum = 0;
        for (std::size_t w = 0; w < row.values.size(); ++w) sum += row.values[w] * v[row.window_start + w];
        return detail::to_double(sum);
    }

    std::size_t storage_bytes() const override {
        return basis_.storage_bytes() + lu_.storage_bytes() + s_.capacity() * sizeof(T) +
               (band_ ? band_->storage_bytes() : 0);
    }

private:
    std::unique_ptr<const BandVariance> make_band() const {
        const auto wanted = band_inverse_precision(basis_.kernel(), basis_.knots());
        if (!wanted) return nullptr;
        return detail::dispatch(detail::wider(*wanted, precision_of<T>()),
                                [this]<class W>() -> std::unique_ptr<const BandVariance> {
                                    if constexpr (std::is_same_v<W, T>) {
                                        return BandVarianceAs<T>::build(basis_, nullptr, nugget_);
                                    } else {
                                        auto own = std::make_unique<BasicKpBasis<W>>(build_basis_as<W>(
                                            basis_.kernel(), std::vector<double>(basis_.knots().begin(), basis_.knots().end())));
                                        const auto& ref = *own;
                                        return BandVarianceAs<W>::build(ref, std::move(own), nugget_);
                                    }
                                });
    }

    BasicKpBasis<T> basis_;
    BasicBandedFactorization<T> lu_;
    Vec<T> s_;
    double nugget_ = 0.0;
    mutable std::once_flag band_once_;
    mutable std::unique_ptr<const BandVariance> band_;
};

template <class T>
LogLikTerms loglik_terms(const BasicKpBasis<T>& basis, const BasicBandedFactorization<T>& lu_m,
                         std::span<const T> r, double sigma2) {
    const auto lu_a = factorize(basis.a(), "A");
    const BasicLogDet<T> dm = band_logdet(lu_m);
    const BasicLogDet<T> da = band_logdet(lu_a);
    if (dm.sign * da.sign != 1)
        fail(ErrorKind::NumericalBreakdown, "determinants of M and A have opposite signs; K is not positive definite");
    const Vec<T> s = band_solve(lu_m, r);
    const Vec<T> ar = band_matvec_transpose(basis.a(), r);

    LogLikTerms out;
    out.logdet_m = detail::to_double(dm.log_abs_det);
    out.logdet_a = detail::to_double(da.log_abs_det);
    const T quad = dot<T>(ar, s);
    out.quadratic = detail::to_double(quad);
    const double nn = static_cast<double>(r.size());
    const T logdet_ratio = dm.log_abs_det - da.log_abs_det;
    out.value = -0.5 * (nn * std::log(sigma2) + detail::to_double(logdet_ratio) + detail::to_double(quad / T(sigma2)) +
                        nn * std::log(2.0 * std::numbers::pi));
    return out;
}

struct FitCore {
    std::vector<double> beta;
    double sigma2 = 1.0;
    std::vector<double> s;
    std::shared_ptr<const detail::Gp1dState> state;
    LogLikTerms terms; // filled when requested
};

template <class T>
FitCore fit_core(const HalfIntegerMatern& kern, std::vector<double> knots, std::span<const double> y,
                 const Eigen::MatrixXd& design, const FitOptions& options, bool with_loglik,
                 std::optional<double> sigma2_floor, bool* floored) {
    BasicKpBasis<T> basis = build_basis_as<T>(kern, std::move(knots));
    const std::size_t n = basis.size();
    auto lu = factorize(system_matrix(basis, options.nugget_ratio), "Phi + eta A");

    FitCore out;
    out.beta = options.beta ? *options.beta : gls_beta(basis, lu, design, y);
    const Vec<T> r = residual<T>(y, design, out.beta);
    Vec<T> s = band_solve(lu, std::span<const T>(r));
    if (options.sigma2) {
        out.sigma2 = *options.sigma2;
    } else {
        const Vec<T> ar = band_matvec_transpose(basis.a(), std::span<const T>(r));
        out.sigma2 = detail::to_double(dot<T>(ar, s) / T(static_cast<double>(n)));
        if (sigma2_floor && !(out.sigma2 > *sigma2_floor)) {
            out.sigma2 = *sigma2_floor;
            if (floored) *floored = true;
        }
    }
    if (with_loglik) out.terms = loglik_terms<T>(basis, lu, r, out.sigma2);
    out.s.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.s[i] = detail::to_double(s[i]);
    out.state = std::make_shared<State<T>>(std::move(basis), std::move(lu), std::move(s), options.nugget_ratio);
    return out;
}

void check_fit_inputs(const MeanModel& mean, std::size_t n, std::span<const double> y, const FitOptions& options) {
    check_observations(n, y);
    check_nugget(options.nugget_ratio);
    if (options.sigma2 && !(*options.sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
    if (options.beta && options.beta->size() != mean.size())
        fail(ErrorKind::Parameter, "expected " + std::to_string(mean.size()) + " mean coefficients");
}

} // namespace

std::size_t Gp1dModel::storage_bytes() const noexcept {
    return (state_ ? state_->storage_bytes() : 0) + knots_.capacity() * sizeof(double) +
           y_.capacity() * sizeof(double) + s_.capacity() * sizeof(double);
}

Gp1dModel fit_1d(const HalfIntegerMatern& kern, std::vector<double> knots, std::vector<double> y,
                 const MeanModel& mean, const FitOptions& options) {
    check_fit_inputs(mean, knots.size(), y, options);
    Gp1dModel model(kern);
    model.precision_ = resolve_precision(options.precision, kern, knots);
    model.mean_ = mean;
    model.design_ = mean.design(knots, 1);
    model.y_ = std::move(y);
    model.nugget_ = options.nugget_ratio;
    FitCore core = detail::dispatch(model.precision_, [&]<class T>() {
        return fit_core<T>(kern, knots, model.y_, model.design_, options, false, std::nullopt, nullptr);
    });
    model.knots_ = std::move(knots);
    model.beta_ = std::move(core.beta);
    model.sigma2_ = core.sigma2;
    model.s_ = std::move(core.s);
    model.state_ = std::move(core.state);
    return model;
}

std::vector<double> predict_mean(const Gp1dModel& model, std::span<const double> xstars, bool sorted_hint) {
    std::vector<double> out(xstars.size());
    std::optional<std::ptrdiff_t> hint;
    for (std::size_t t = 0; t < xstars.size(); ++t) {
        if (!sorted_hint) hint.reset();
        out[t] = model.mean_.mean(xstars.subspan(t, 1), model.beta_) + model.state_->correction(xstars[t], hint);
    }
    return out;
}

std::vector<double> predict_variance(const Gp1dModel& model, std::span<const double> xstars) {
    std::vector<double> out(xstars.size());
    for (std::size_t t = 0; t < xstars.size(); ++t) {
        const double x = xstars[t];
        double var = model.sigma2_ * (1.0 - model.state_->explained(x));
        if (var < 0.0) {
            if (var < -kVarianceClamp * model.sigma2_)
                fail(ErrorKind::NumericalBreakdown,
                     "negative posterior variance " + std::to_string(var) + " at x = " + std::to_string(x));
            var = 0.0;
        }
        out[t] = var;
    }
    return out;
}

LogLikTerms log_likelihood_1d(const HalfIntegerMatern& kern, std::vector<double> knots, std::span<const double> y,
                              const MeanModel& mean, std::span<const double> beta, double sigma2,
                              double nugget_ratio, Precision precision) {
    if (beta.size() != mean.size())
        fail(ErrorKind::Parameter, "expected " + std::to_string(mean.size()) + " mean coefficients");
    if (!(sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
    FitOptions opts;
    opts.beta = std::vector<double>(beta.begin(), beta.end());
    opts.sigma2 = sigma2;
    opts.nugget_ratio = nugget_ratio;
    check_fit_inputs(mean, knots.size(), y, opts);
    const Eigen::MatrixXd design = mean.design(knots, 1);
    const Precision resolved = resolve_precision(precision, kern, knots);
    return detail::dispatch(resolved, [&]<class T>() {
               return fit_core<T>(kern, std::move(knots), y, design, opts, true, std::nullopt, nullptr);
           })
        .terms;
}

ProfilePoint profile_loglik_1d(int p, double omega, double nugget_ratio, std::span<const double> knots,
                               std::span<const double> y, const MeanModel& mean, Precision precision) {
    const HalfIntegerMatern kern(p, omega);
    FitOptions opts;
    opts.nugget_ratio = nugget_ratio;
    check_fit_inputs(mean, knots.size(), y, opts);
    double mean_square = 0.0;
    for (double v : y) mean_square += v * v;
    mean_square /= static_cast<double>(y.size());
    const double floor = kSigma2Floor * std::max(mean_square, std::numeric_limits<double>::min());

    const Eigen::MatrixXd design = mean.design(knots, 1);
    const Precision resolved = resolve_precision(precision, kern, knots);
    ProfilePoint out;
    FitCore core = detail::dispatch(resolved, [&]<class T>() {
        return fit_core<T>(kern, std::vector<double>(knots.begin(), knots.end()), y, design, opts, true, floor,
                           &out.sigma2_floored);
    });
    out.beta = std::move(core.beta);
    out.sigma2 = core.sigma2;
    out.terms = core.terms;
    out.loglik = core.terms.value;
    return out;
}

MleResult profile_mle_1d(int p, std::span<const double> knots, std::span<const double> y, const MeanModel& mean,
                         const MleOptions& options) {
    if (knots.size() < 2) fail(ErrorKind::InsufficientData, "need at least two knots");
    const double range = knots.back() - knots.front();
    const double lo = options.omega_lower.value_or(0.01 * range);
    const double hi = options.omega_upper.value_or(10.0 * range);
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) fail(ErrorKind::Parameter, "invalid omega search bounds");
    if (options.starts < 1) fail(ErrorKind::Parameter, "need at least one optimizer start");
    if (options.estimate_nugget && !(options.nugget_lower > 0.0 && options.nugget_upper > options.nugget_lower))
        fail(ErrorKind::Parameter, "invalid nugget search bounds");
    const double log_lo = std::log(lo), log_hi = std::log(hi);

    // numerical failures at extreme trial parameters rank as -inf
    auto objective = [&](double log_omega, double eta) {
        try {
            return profile_loglik_1d(p, std::exp(log_omega), eta, knots, y, mean, options.precision).loglik;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Data || e.kind() == ErrorKind::Parameter ||
                e.kind() == ErrorKind::InsufficientData || e.kind() == ErrorKind::DegenerateDesign ||
                e.kind() == ErrorKind::CollinearRegressors)
                throw;
            return -std::numeric_limits<double>::infinity();
        }
    };

    MleResult result;
    double best = -std::numeric_limits<double>::infinity();
    double best_log_omega = 0.0, best_log_eta = 0.0;
    bool best_converged = false;

    if (!options.estimate_nugget) {
        check_nugget(options.nugget_ratio);
        const double width = (log_hi - log_lo) / options.starts;
        for (int s = 0; s < options.starts; ++s) {
            const double a = log_lo + s * width;
            const auto opt = golden_section_maximize([&](double t) { return objective(t, options.nugget_ratio); }, a,
                                                     a + width, options.tolerance, options.max_iterations);
            result.iterations += opt.iterations;
            result.evaluations += opt.evaluations;
            if (opt.value > best) {
                best = opt.value;
                best_log_omega = opt.x[0];
                best_converged = opt.converged;
            }
        }
    } else {
        const double eta_lo = std::log(options.nugget_lower), eta_hi = std::log(options.nugget_upper);
        std::mt19937_64 rng(options.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int s = 0; s < options.starts; ++s) {
            std::vector<double> start{log_lo + unit(rng) * (log_hi - log_lo), eta_lo + unit(rng) * (eta_hi - eta_lo)};
            const auto opt = nelder_mead_maximize(
                [&](const std::vector<double>& t) { return objective(t[0], std::exp(t[1])); }, start,
                {log_lo, eta_lo}, {log_hi, eta_hi}, 0.5, options.tolerance, options.max_iterations);
            result.iterations += opt.iterations;
            result.evaluations += opt.evaluations;
            if (opt.value > best) {
                best = opt.value;
                best_log_omega = opt.x[0];
                best_log_eta = opt.x[1];
                best_converged = opt.converged;
            }
        }
    }
    if (!std::isfinite(best)) fail(ErrorKind::OptimizationFailure, "no start produced a finite log likelihood");

    const double eta = options.estimate_nugget ? std::exp(best_log_eta) : options.nugget_ratio;
    const ProfilePoint at = profile_loglik_1d(p, std::exp(best_log_omega), eta, knots, y, mean, options.precision);
    result.omega_hat = std::exp(best_log_omega);
    result.sigma2_hat = at.sigma2;
    result.beta_hat = at.beta;
    if (options.estimate_nugget) result.nugget_ratio_hat = eta;
    result.loglik_value = at.loglik;
    result.converged = best_converged;
    const double edge = 10.0 * options.tolerance;
    result.boundary = at.sigma2_floored || best_log_omega - log_lo <= edge || log_hi - best_log_omega <= edge;
    if (options.estimate_nugget)
        result.boundary = result.boundary || best_log_eta - std::log(options.nugget_lower) <= edge ||
                          std::log(options.nugget_upper) - best_log_eta <= edge;
    return result;
}

} // namespace kpgp
