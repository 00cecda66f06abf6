#include "kpgp/kp_basis.hpp"

#include "detail/scalar.hpp"
#include "kpgp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <type_traits>
#include <string>

namespace kpgp {

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Below this value of c * (half width of the knot window) the exponential rows
// exp(+-c a) a^l are nearly linearly dependent; the same row space is then
// spanned by the Taylor basis of the annihilating differential operator.
constexpr double kTaylorBasisLimit = 2.0;
// Null space accepted when the smallest singular value exceeds this many ulps
// of the largest.
constexpr double kNullSpaceUlps = 1e3;
// The null vector error is about eps / (smallest / largest singular value);
// windows whose estimate exceeds this are solved again in quad precision.
constexpr double kNullVectorError = 1e-12;
constexpr double kConsistencyUlps = 1e3;
constexpr double kMaxExponent = 700.0;
constexpr int kSingularValueSweeps = 5000;

struct RootCounts {
    int plus = 0;  // rows a^l exp(+c a)
    int minus = 0; // rows a^l exp(-c a)
};

RootCounts root_counts(const HalfIntegerMatern& kern, std::size_t s, KpKind kind) {
    const int m = kern.half_width();
    const int aux = static_cast<int>(s) - m - 1;
    switch (kind) {
    case KpKind::Central: return {m, m};
    case KpKind::Right: return {aux, m};
    case KpKind::Left: return {m, aux};
    }
    return {};
}

void check_knots(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) fail(ErrorKind::DegenerateDesign, "knots must be finite");
    for (std::size_t i = 1; i < a.size(); ++i)
        if (!(a[i] > a[i - 1]))
            fail(ErrorKind::DegenerateDesign, "knots must be strictly increasing (index " + std::to_string(i) + ")");
}

void check_one_sided_size(const HalfIntegerMatern& kern, std::size_t s) {
    const int k = kern.degree();
    if (static_cast<int>(s) < (k + 1) / 2 || static_cast<int>(s) > k - 1)
        fail(ErrorKind::Parameter, "one-sided kernel packet needs between " + std::to_string((k + 1) / 2) +
                                       " and " + std::to_string(k - 1) + " knots, got " + std::to_string(s));
}

// Rows t_i(u) = u^i + O(u^N) spanning the solutions of
// (D - b)^plus (D + b)^minus f = 0, with u the standardized knot position.
template <class T>
Mat<T> taylor_rows(const RootCounts& roots, const T& b, const std::vector<T>& u) {
    using std::abs;
    const int order = roots.plus + roots.minus;
    // characteristic polynomial coefficients, lowest degree first
    std::vector<T> chi{T(1)};
    auto multiply = [&chi](const T& root) {
        std::vector<T> next(chi.size() + 1, T(0));
        for (std::size_t r = 0; r < chi.size(); ++r) {
            next[r + 1] += chi[r];
            next[r] -= root * chi[r];
        }
        chi = std::move(next);
    };
    for (int t = 0; t < roots.plus; ++t) multiply(b);
    for (int t = 0; t < roots.minus; ++t) multiply(-b);

    const T tiny = detail::epsilon<T>() * T(1e-3);
    const int max_terms = order + 200;
    Mat<T> rows(order, static_cast<Eigen::Index>(u.size()));
    std::vector<T> deriv(max_terms);
    for (int i = 0; i < order; ++i) {
        std::fill(deriv.begin(), deriv.end(), T(0));
        T fact_i = 1;
        for (int t = 2; t <= i; ++t) fact_i *= t;
        deriv[i] = fact_i;
        // Taylor coefficients deriv[n] / n! beyond the prescribed ones
        std::vector<T> series;
        T factorial_n = 1;
        for (int n = 1; n < order; ++n) factorial_n *= n;
        int quiet = 0;
        for (int n = order; n < max_terms; ++n) {
            factorial_n *= n;
            T d = 0;
            for (int r = 0; r < order; ++r) d -= chi[r] * deriv[n - order + r];
            deriv[n] = d;
            const T coef = d / factorial_n;
            series.push_back(coef);
            quiet = abs(coef) < tiny ? quiet + 1 : 0;
            if (quiet > order + 2) break;
        }
        for (std::size_t j = 0; j < u.size(); ++j) {
            const T& uj = u[j];
            T power = 1;
            for (int t = 0; t < order; ++t) power *= uj;
            T tail = 0;
            for (const T& coef : series) {
                tail += coef * power;
                power *= uj;
            }
            T lead = 1;
            for (int t = 0; t < i; ++t) lead *= uj;
            rows(i, static_cast<Eigen::Index>(j)) = lead + tail;
        }
    }
    return rows;
}

// Equilibrated system R with columns scaled by exp(log_col_scale): the packet
// coefficients are x_j = y_j * exp(log_col_scale[j]) for y in the null space of R.
template <class T>
struct ScaledSystem {
    Mat<T> rows;
    std::vector<T> log_col_scale;
};

// Rows a^l exp(delta c a), held as log-magnitudes and balanced by alternating
// row and column scaling so that no entry overflows and the decay of
// exp(-c |a|) across the window does not swamp the small entries.
template <class T>
ScaledSystem<T> exponential_rows(const RootCounts& roots, const T& c, const std::vector<T>& a) {
    using std::abs;
    using std::exp;
    using std::log;
    using std::max;
    const std::size_t order = static_cast<std::size_t>(roots.plus + roots.minus);
    const std::size_t s = a.size();
    const T zero_log = -std::numeric_limits<T>::infinity();
    std::vector<T> log_mag(order * s);
    std::vector<int> sign(order * s, 1);
    std::size_t row = 0;
    auto emit = [&](int power, int delta) {
        for (std::size_t j = 0; j < s; ++j) {
            const T base = power == 0 ? T(0) : a[j] == T(0) ? zero_log : T(power * log(abs(a[j])));
            log_mag[row * s + j] = base + T(delta) * c * a[j];
            if (power % 2 == 1 && a[j] < T(0)) sign[row * s + j] = -1;
        }
        ++row;
    };
    for (int l = 0; l < roots.plus; ++l) emit(l, +1);
    for (int l = 0; l < roots.minus; ++l) emit(l, -1);

    std::vector<T> row_shift(order, T(0));
    std::vector<T> col_shift(s, T(0));
    for (int sweep = 0; sweep < 30; ++sweep) {
        T change = 0;
        for (std::size_t r = 0; r < order; ++r) {
            T top = zero_log;
            for (std::size_t j = 0; j < s; ++j) top = max(top, T(log_mag[r * s + j] + col_shift[j]));
            change = max(change, T(abs(-top - row_shift[r])));
            row_shift[r] = -top;
        }
        for (std::size_t j = 0; j < s; ++j) {
            T top = zero_log;
            for (std::size_t r = 0; r < order; ++r) top = max(top, T(log_mag[r * s + j] + row_shift[r]));
            if (top == zero_log) continue;
            change = max(change, T(abs(-top - col_shift[j])));
            col_shift[j] = -top;
        }
        if (change < T(1e-3)) break;
    }

    ScaledSystem<T> out;
    out.rows.resize(static_cast<Eigen::Index>(order), static_cast<Eigen::Index>(s));
    for (std::size_t r = 0; r < order; ++r)
        for (std::size_t j = 0; j < s; ++j) {
            const T v = exp(T(log_mag[r * s + j] + row_shift[r] + col_shift[j]));
            out.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = sign[r * s + j] < 0 ? T(-v) : v;
        }
    out.log_col_scale = col_shift;
    return out;
}

template <class T>
ScaledSystem<T> system_matrix(const HalfIntegerMatern& kern, const T& c, std::span<const double> a, KpKind kind) {
    const RootCounts roots = root_counts(kern, a.size(), kind);
    const double width = a.back() - a.front();
    if (kern.c() * width > kMaxExponent)
        fail(ErrorKind::Conditioning, "knot window too wide for the kernel scale: c * width = " +
                                          std::to_string(kern.c() * width));
    const T lo = T(a.front()), hi = T(a.back());
    const T half = (hi - lo) / 2;
    ScaledSystem<T> sys;
    std::vector<T> shifted(a.size());
    if (kern.c() * 0.5 * width <= kTaylorBasisLimit) {
        const T mid = (lo + hi) / 2;
        for (std::size_t j = 0; j < a.size(); ++j) shifted[j] = (T(a[j]) - mid) / half;
        sys.rows = taylor_rows<T>(roots, T(c * half), shifted);
        sys.log_col_scale.assign(a.size(), T(0));
    } else {
        // shift so the window is centered (central), starts at 0 (right) or ends at 0 (left)
        const T shift = kind == KpKind::Central ? T(-(lo + hi) / 2) : kind == KpKind::Right ? T(-lo) : T(-hi);
        for (std::size_t j = 0; j < a.size(); ++j) shifted[j] = T(a[j]) + shift;
        sys = exponential_rows<T>(roots, c, shifted);
    }
    // rows to unit max, columns to unit 2-norm; column factors are folded into log_col_scale
    using std::log;
    for (int sweep = 0; sweep < 8; ++sweep) {
        for (Eigen::Index r = 0; r < sys.rows.rows(); ++r) {
            const T top = sys.rows.row(r).cwiseAbs().maxCoeff();
            if (top > T(0)) sys.rows.row(r) /= top;
        }
        if (sweep == 7) break;
        for (Eigen::Index j = 0; j < sys.rows.cols(); ++j) {
            const T norm = sys.rows.col(j).norm();
            if (!(norm > T(0))) continue;
            sys.rows.col(j) /= norm;
            sys.log_col_scale[static_cast<std::size_t>(j)] -= log(norm);
        }
    }
    return sys;
}

template <class T>
std::optional<std::vector<T>> try_solve_packet(const HalfIntegerMatern& kern, const T& c, std::span<const double> a,
                                               KpKind kind) {
    using std::abs;
    using std::exp;
    using std::log;
    const ScaledSystem<T> sys = system_matrix<T>(kern, c, a, kind);
    const std::size_t s = a.size();

    Eigen::JacobiSVD<Mat<T>> svd(sys.rows, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() > 0) {
        const T floor = (std::is_same_v<T, detail::quad> ? T(kNullSpaceUlps) : T(1 / kNullVectorError)) *
                        detail::epsilon<T>() * sv(0);
        if (sv(sv.size() - 1) <= floor) return std::nullopt;
    }
    const auto null = svd.matrixV().col(static_cast<Eigen::Index>(s) - 1);

    // undo the column scaling in the log domain, then normalize to unit max norm
    const T zero_log = -std::numeric_limits<T>::infinity();
    std::vector<T> log_abs(s);
    T top = zero_log;
    for (std::size_t j = 0; j < s; ++j) {
        const T y = null(static_cast<Eigen::Index>(j));
        log_abs[j] = y == T(0) ? zero_log : T(log(abs(y)) + sys.log_col_scale[j]);
        if (log_abs[j] > top) top = log_abs[j];
    }
    std::vector<T> coeffs(s);
    int first_sign = 0;
    for (std::size_t j = 0; j < s; ++j) {
        const T y = null(static_cast<Eigen::Index>(j));
        const T mag = exp(T(log_abs[j] - top));
        coeffs[j] = y < T(0) ? T(-mag) : mag;
        if (first_sign == 0 && coeffs[j] != T(0)) first_sign = coeffs[j] > T(0) ? 1 : -1;
    }
    if (first_sign < 0)
        for (T& v : coeffs) v = -v;
    return coeffs;
}

template <class T>
std::vector<T> solve_packet_in_quad(const HalfIntegerMatern& kern, std::span<const double> a, KpKind kind) {
    const auto wide =
        try_solve_packet<detail::quad>(kern, MaternEvaluator<detail::quad>(kern.p(), kern.omega()).c(), a, kind);
    if (!wide) fail(ErrorKind::Conditioning, "kernel packet system has a numerically multi-dimensional null space");
    std::vector<T> out(wide->size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>((*wide)[j]);
    return out;
}

template <class T>
std::vector<T> solve_packet(const HalfIntegerMatern& kern, const T& c, std::span<const double> a, KpKind kind) {
    check_knots(a);
    if (auto coeffs = try_solve_packet<T>(kern, c, a, kind)) return std::move(*coeffs);
    return solve_packet_in_quad<T>(kern, a, kind);
}

KpCoefficients packet_in_double(const HalfIntegerMatern& kern, std::span<const double> a, KpKind kind) {
    KpCoefficients out;
    out.knots.assign(a.begin(), a.end());
    out.coeffs = solve_packet<double>(kern, kern.c(), a, kind);
    out.kind = kind;
    return out;
}

// phi(x) by the direct sum or by the odd-part identities. The coefficients
// annihilate the smooth part of every translate, which leaves
// phi(x) = 2 sum_{a_w < x} A_w h(x - a_w) (right-sided and central) and
// phi(x) = 2 sum_{a_w > x} A_w h(a_w - x) (left-sided and central), h being
// the odd part of the analytic kernel branch. The candidate with the smallest
// sum of absolute terms wins; an empty identity is the exact zero outside
// the support.
template <class T>
T packet_value(const MaternEvaluator<T>& eval, std::span<const double> knots, const T* coeffs, KpKind kind,
               const T& x) {
    using std::abs;
    T best = 0;
    T best_mag = std::numeric_limits<T>::infinity();
    auto consider = [&](const T& value, const T& mag) {
        if (mag < best_mag) {
            best = value;
            best_mag = mag;
        }
    };
    if (kind != KpKind::Left) {
        T value = 0, mag = 0;
        for (std::size_t w = 0; w < knots.size() && T(knots[w]) < x; ++w) {
            const T term = coeffs[w] * eval.odd_part(x - T(knots[w]));
            value += term;
            mag += abs(term);
        }
        consider(T(2 * value), T(2 * mag));
    }
    if (kind != KpKind::Right) {
        T value = 0, mag = 0;
        for (std::size_t w = knots.size(); w-- > 0 && T(knots[w]) > x;) {
            const T term = coeffs[w] * eval.odd_part(T(knots[w]) - x);
            value += term;
            mag += abs(term);
        }
        consider(T(2 * value), T(2 * mag));
    }
    if (best_mag > T(0)) {
        T value = 0, mag = 0;
        for (std::size_t w = 0; w < knots.size(); ++w) {
            const T term = coeffs[w] * eval.at_distance(x - T(knots[w]));
            value += term;
            mag += abs(term);
        }
        consider(value, mag);
    }
    return best;
}

// Whether the odd-part identities agree with the direct sum at the window
// knots up to the rounding of the direct sum. They differ by the coefficient
// residual weighted with growing exponentials, which a null vector that is
// accurate in the scaled norm can still leave visible.
template <class T>
bool identities_consistent(const MaternEvaluator<T>& eval, std::span<const double> knots, const std::vector<T>& coeffs,
                           KpKind kind) {
    using std::abs;
    for (double knot : knots) {
        const T x = T(knot);
        T direct = 0, mag = 0;
        for (std::size_t w = 0; w < knots.size(); ++w) {
            const T term = coeffs[w] * eval.at_distance(x - T(knots[w]));
            direct += term;
            mag += abs(term);
        }
        const T value = packet_value<T>(eval, knots, coeffs.data(), kind, x);
        if (abs(T(value - direct)) > T(kConsistencyUlps) * detail::epsilon<T>() * mag) return false;
    }
    return true;
}

} // namespace

const char* to_string(KpKind kind) {
    switch (kind) {
    case KpKind::Left: return "left";
    case KpKind::Central: return "central";
    case KpKind::Right: return "right";
    }
    return "?";
}

KpCoefficients central_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a) {
    if (static_cast<int>(a.size()) != kern.degree())
        fail(ErrorKind::Parameter, "central kernel packet needs exactly " + std::to_string(kern.degree()) +
                                       " knots, got " + std::to_string(a.size()));
    return packet_in_double(kern, a, KpKind::Central);
}

KpCoefficients right_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a) {
    check_one_sided_size(kern, a.size());
    return packet_in_double(kern, a, KpKind::Right);
}

KpCoefficients left_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a) {
    check_one_sided_size(kern, a.size());
    return packet_in_double(kern, a, KpKind::Left);
}

std::vector<double> kp_system_singular_values(const HalfIntegerMatern& kern, std::span<const double> a,
                                              KpKind kind) {
    check_knots(a);
    if (a.size() < 2) fail(ErrorKind::Parameter, "need at least two knots");
    if (kind != KpKind::Central) check_one_sided_size(kern, a.size());
    // Symmetric two-norm scaling run to convergence; much closer to the best
    // diagonal scaling than the cheap sweeps the solver uses.
    Eigen::MatrixXd rows = system_matrix<double>(kern, kern.c(), a, kind).rows;
    for (int sweep = 0; sweep < kSingularValueSweeps; ++sweep) {
        double change = 0;
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
            const double norm = rows.row(r).norm();
            if (!(norm > 0)) continue;
            rows.row(r) /= std::sqrt(norm);
            change = std::max(change, std::fabs(std::log(norm)));
        }
        // columns aim at sqrt(rows / cols) so both targets are consistent
        const double target = std::sqrt(static_cast<double>(rows.rows()) / static_cast<double>(rows.cols()));
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            const double norm = rows.col(j).norm() / target;
            if (!(norm > 0)) continue;
            rows.col(j) /= std::sqrt(norm);
            change = std::max(change, std::fabs(std::log(norm)));
        }
        if (change < 1e-8) break;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
    const auto& sv = svd.singularValues();
    return {sv.data(), sv.data() + sv.size()};
}

double kp_value_direct(const HalfIntegerMatern& kern, std::span<const double> knots,
                       std::span<const double> coeffs, double x) {
    double sum = 0.0;
    for (std::size_t w = 0; w < knots.size(); ++w) sum += coeffs[w] * kern(x, knots[w]);
    return sum;
}

double kp_value(const HalfIntegerMatern& kern, std::span<const double> knots, std::span<const double> coeffs,
                KpKind kind, double x) {
    if (coeffs.size() != knots.size()) fail(ErrorKind::Parameter, "knot and coefficient counts differ");
    return packet_value<double>(kern.evaluator(), knots, coeffs.data(), kind, x);
}

template <class T>
KpKind BasicKpBasis<T>::kind(std::size_t j) const noexcept {
    const std::size_t m = static_cast<std::size_t>(kernel_.half_width());
    if (j < m) return KpKind::Left;
    if (j + m >= size()) return KpKind::Right;
    return KpKind::Central;
}

template <class T>
std::size_t BasicKpBasis<T>::window_start(std::size_t j) const noexcept {
    const std::size_t m = static_cast<std::size_t>(kernel_.half_width());
    return j > m ? j - m : 0;
}

template <class T>
std::size_t BasicKpBasis<T>::window_length(std::size_t j) const noexcept {
    const std::size_t m = static_cast<std::size_t>(kernel_.half_width());
    return std::min(size() - 1, j + m) - window_start(j) + 1;
}

template <class T>
std::vector<T> BasicKpBasis<T>::coefficients(std::size_t j) const {
    std::vector<T> out(window_length(j));
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = a_(window_start(j) + t, j);
    return out;
}

template <class T>
T BasicKpBasis<T>::value(std::size_t j, double x) const {
    const std::size_t lo = window_start(j);
    const std::size_t len = window_length(j);
    const T* col = a_.bands().data() + j * a_.ld() + a_.ku() + lo - j;
    return packet_value<T>(eval_, std::span<const double>(knots_).subspan(lo, len), col, kind(j), T(x));
}

template <class T>
std::ptrdiff_t BasicKpBasis<T>::locate(double x, std::optional<std::ptrdiff_t> hint) const {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(knots_.size());
    auto fits = [&](std::ptrdiff_t i) {
        if (i < -1 || i >= n) return false;
        const bool above = i < 0 || knots_[i] <= x;
        const bool below = i + 1 >= n || x < knots_[i + 1];
        return above && below;
    };
    if (hint) {
        for (std::ptrdiff_t probe : {*hint, *hint + 1, *hint - 1})
            if (fits(probe)) return probe;
    }
    if (x < knots_.front()) return -1;
    if (x >= knots_.back()) return n - 1;
    if (equally_spaced_) {
        const auto guess = static_cast<std::ptrdiff_t>(std::floor((x - knots_.front()) / spacing_));
        for (std::ptrdiff_t probe : {guess, guess - 1, guess + 1})
            if (fits(probe)) return probe;
    }
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    return static_cast<std::ptrdiff_t>(it - knots_.begin()) - 1;
}

template <class T>
void BasicKpBasis<T>::rescale_column(std::size_t j, const T& factor) {
    for (std::size_t i = 0; i < size(); ++i) {
        if (a_.in_band(i, j)) a_.at(i, j) *= factor;
        if (phi_.in_band(i, j)) phi_.at(i, j) *= factor;
    }
}

template <class T>
BasicKpBasis<T> build_basis_as(const HalfIntegerMatern& kern, std::vector<double> knots) {
    const std::size_t n = knots.size();
    const std::size_t k = static_cast<std::size_t>(kern.degree());
    const std::size_t m = static_cast<std::size_t>(kern.half_width());
    if (n < k)
        fail(ErrorKind::InsufficientData, "KP basis needs at least k = " + std::to_string(k) + " knots, got " +
                                              std::to_string(n));
    check_knots(knots);

    BasicKpBasis<T> basis(kern);
    basis.knots_ = std::move(knots);
    const auto& x = basis.knots_;
    basis.a_ = BasicBandedMatrix<T>(n, m, m);
    basis.phi_ = BasicBandedMatrix<T>(n, m - 1, m - 1);

    basis.spacing_ = (x.back() - x.front()) / static_cast<double>(n - 1);
    basis.equally_spaced_ = true;
    for (std::size_t i = 1; i < n && basis.equally_spaced_; ++i)
        if (std::fabs((x[i] - x[i - 1]) - basis.spacing_) > kEqualSpacingTolerance * basis.spacing_)
            basis.equally_spaced_ = false;

    std::vector<T> shared_coeffs;
    std::vector<T> shared_phi; // phi_j(x_{j+d}) for d = -(m-1) .. m-1
    const std::span<const double> xs(x);
    const T c = basis.eval_.c();

    for (std::size_t j = 0; j < n; ++j) {
        const KpKind kind = basis.kind(j);
        const std::size_t lo = basis.window_start(j);
        const std::size_t len = basis.window_length(j);

        if (kind == KpKind::Central && basis.equally_spaced_ && !shared_coeffs.empty()) {
            for (std::size_t t = 0; t < len; ++t) basis.a_.at(lo + t, j) = shared_coeffs[t];
            for (std::size_t d = 0; d < shared_phi.size(); ++d) basis.phi_.at(j + d - (m - 1), j) = shared_phi[d];
            continue;
        }

        const auto window = xs.subspan(lo, len);
        if (kind != KpKind::Central) check_one_sided_size(kern, len);
        std::vector<T> coeffs = solve_packet<T>(kern, c, window, kind);
        if constexpr (!std::is_same_v<T, detail::quad>)
            if (!identities_consistent<T>(basis.eval_, window, coeffs, kind))
                coeffs = solve_packet_in_quad<T>(kern, window, kind);
        for (std::size_t t = 0; t < len; ++t) basis.a_.at(lo + t, j) = coeffs[t];

        const std::size_t row_lo = j >= m - 1 ? j - (m - 1) : 0;
        const std::size_t row_hi = std::min(n - 1, j + m - 1);
        for (std::size_t l = row_lo; l <= row_hi; ++l)
            basis.phi_.at(l, j) = packet_value<T>(basis.eval_, window, coeffs.data(), kind, T(x[l]));

        if (kind == KpKind::Central && basis.equally_spaced_) {
            shared_coeffs = coeffs;
            for (std::size_t l = j - (m - 1); l <= j + m - 1; ++l) shared_phi.push_back(basis.phi_(l, j));
        }
    }
    return basis;
}

KpBasis build_basis(const HalfIntegerMatern& kern, std::vector<double> knots) {
    return build_basis_as<double>(kern, std::move(knots));
}

template <class T>
BasicBasisRow<T> evaluate_basis_row(const BasicKpBasis<T>& basis, double x, std::optional<std::ptrdiff_t> hint) {
    const std::ptrdiff_t m = basis.kernel().half_width();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(basis.size());
    const std::ptrdiff_t i = basis.locate(x, hint);
    const std::ptrdiff_t first = std::max<std::ptrdiff_t>(0, i + 1 - m);
    const std::ptrdiff_t last = std::min<std::ptrdiff_t>(n - 1, i + m);
    BasicBasisRow<T> row;
    row.window_start = static_cast<std::size_t>(first);
    row.interval = i;
    row.values.reserve(static_cast<std::size_t>(last - first + 1));
    for (std::ptrdiff_t j = first; j <= last; ++j) row.values.push_back(basis.value(static_cast<std::size_t>(j), x));
    return row;
}

std::string format_basis_table(const KpBasis& basis) {
    std::string out = "# j kind window_start window_len coeffs...\n";
    char buf[64];
    for (std::size_t j = 0; j < basis.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%zu %s %zu %zu", j, to_string(basis.kind(j)), basis.window_start(j),
                      basis.window_length(j));
        out += buf;
        for (double v : basis.coefficients(j)) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

#define KPGP_INSTANTIATE(T)                                                                              \
    template class BasicKpBasis<T>;                                                                      \
    template BasicKpBasis<T> build_basis_as<T>(const HalfIntegerMatern&, std::vector<double>);           \
    template BasicBasisRow<T> evaluate_basis_row<T>(const BasicKpBasis<T>&, double, std::optional<std::ptrdiff_t>);
KPGP_FOR_EACH_SCALAR(KPGP_INSTANTIATE)
#undef KPGP_INSTANTIATE

} // namespace kpgp
