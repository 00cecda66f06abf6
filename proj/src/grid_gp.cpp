#include "kpgp/grid_gp.hpp"

#include "detail/dispatch.hpp"
#include "detail/scalar.hpp"
#include "kpgp/error.hpp"
#include "kpgp/kp_basis.hpp"
#include "kpgp/optimize.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

namespace kpgp {

namespace {

template <class T>
using Vec = std::vector<T>;

void check_knot_set(std::span<const double> knots, const std::string& what) {
    if (knots.empty()) fail(ErrorKind::Design, what + " is empty");
    for (double v : knots)
        if (!std::isfinite(v)) fail(ErrorKind::Design, what + " has a non-finite point");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1])) fail(ErrorKind::Design, what + " is not strictly increasing");
}

std::size_t product(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t v : shape) n *= v;
    return n;
}

// Calls op(line) on every line of v along `axis`, writing the result back.
template <class T, class Op>
void for_each_line(std::span<const std::size_t> shape, std::size_t axis, std::span<T> v, Op&& op) {
    std::size_t stride = 1;
    for (std::size_t i = axis + 1; i < shape.size(); ++i) stride *= shape[i];
    const std::size_t n = shape[axis];
    const std::size_t outer = v.size() / (n * stride);
    Vec<T> line(n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < stride; ++in) {
            T* base = v.data() + o * n * stride + in;
            for (std::size_t t = 0; t < n; ++t) line[t] = base[t * stride];
            op(line);
            for (std::size_t t = 0; t < n; ++t) base[t * stride] = line[t];
        }
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

// Factor of one dimension on one knot set. With fewer knots than the packet
// degree there is no KP basis; Phi is then the dense correlation matrix and A = I.
template <class T>
class DimSolver {
public:
    DimSolver(const HalfIntegerMatern& kern, std::vector<double> knots) : eval_(kern.p(), kern.omega()) {
        const std::size_t n = knots.size();
        if (n >= static_cast<std::size_t>(kern.degree())) {
            basis_.emplace(build_basis_as<T>(kern, std::move(knots)));
            lu_phi_ = factorize(basis_->phi(), "Phi");
            lu_a_ = factorize(basis_->a(), "A");
        } else {
            knots_ = std::move(knots);
            BasicBandedMatrix<T> k(n, n - 1, n - 1);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) k.at(i, j) = kernel_at(knots_[i], knots_[j]);
            lu_phi_ = factorize(k, "K");
            lu_a_ = factorize(BasicBandedMatrix<T>::identity(n), "A");
        }
    }

    std::span<const double> knots() const noexcept { return basis_ ? basis_->knots() : std::span<const double>(knots_); }
    std::size_t size() const noexcept { return knots().size(); }

    void solve_phi(std::span<T> line) const { lu_phi_.solve_in_place(line); }

    void apply_a(Vec<T>& line) const {
        if (basis_) line = band_matvec(basis_->a(), std::span<const T>(line));
    }

    BasicBasisRow<T> row(double x) const {
        if (basis_) return evaluate_basis_row(*basis_, x);
        BasicBasisRow<T> out;
        for (double k : knots_) out.values.push_back(kernel_at(k, x));
        return out;
    }

    /// phi(x)^T Phi^{-1} K(X, x).
    T explained(double x) const {
        const auto xs = knots();
        Vec<T> v(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) v[i] = kernel_at(xs[i], x);
        lu_phi_.solve_in_place(v);
        const BasicBasisRow<T> r = row(x);
        T sum = 0;
        for (std::size_t w = 0; w < r.values.size(); ++w) sum += r.values[w] * v[r.window_start + w];
        return sum;
    }

    /// log det K = log|det Phi| - log|det A|.
    T logdet_k() const {
        const BasicLogDet<T> dp = band_logdet(lu_phi_);
        const BasicLogDet<T> da = band_logdet(lu_a_);
        if (dp.sign * da.sign != 1)
            fail(ErrorKind::NumericalBreakdown, "determinants of Phi and A have opposite signs; K is not positive definite");
        return dp.log_abs_det - da.log_abs_det;
    }

private:
    T kernel_at(double a, double b) const {
        using std::abs;
        return eval_.at_distance(abs(T(a) - T(b)));
    }

    MaternEvaluator<T> eval_;
    std::optional<BasicKpBasis<T>> basis_;
    std::vector<double> knots_;
    BasicBandedFactorization<T> lu_phi_;
    BasicBandedFactorization<T> lu_a_;
};

// Internal description of a grid design: per-dimension knot sets and the
// weighted subgrids. A full grid is one subgrid with weight 1.
struct Layout {
    std::size_t dim = 0;
    bool sparse = false;
    int q = 0;                                        // |l| bound of a sparse grid
    std::vector<std::vector<std::vector<double>>> sets; // [j][slot] knot set
    struct Term {
        std::vector<std::size_t> slot;  // per dimension
        int coefficient = 1;
        std::vector<std::size_t> index; // empty: identity map onto the design points
        std::vector<std::size_t> shape;
    };
    std::vector<Term> terms;
    std::vector<double> points;
    std::size_t size() const { return points.size() / dim; }
};

Layout layout_of(const GridDesign& design) {
    Layout out;
    if (const auto* full = std::get_if<FullGridDesign>(&design)) {
        out.dim = full->dim();
        if (out.dim == 0) fail(ErrorKind::Design, "grid needs at least one dimension");
        Layout::Term term;
        for (std::size_t j = 0; j < out.dim; ++j) {
            check_knot_set(full->knots[j], "knot set of dimension " + std::to_string(j + 1));
            out.sets.push_back({full->knots[j]});
            term.slot.push_back(0);
            term.shape.push_back(full->knots[j].size());
        }
        out.terms.push_back(std::move(term));
        out.points = full->points();
        return out;
    }
    const auto& sg = std::get<SparseGridDesign>(design);
    if (sg.dim == 0 || sg.subgrids.empty()) fail(ErrorKind::Design, "sparse grid has no subgrids");
    out.dim = sg.dim;
    out.sparse = true;
    out.q = sg.level + static_cast<int>(sg.dim) - 1;
    out.sets.assign(sg.dim, sg.level_points);
    for (const auto& sub : sg.subgrids) {
        Layout::Term term;
        term.coefficient = sub.coefficient;
        term.index = sub.index;
        for (int l : sub.levels) {
            term.slot.push_back(static_cast<std::size_t>(l - 1));
            term.shape.push_back(sg.level_points[static_cast<std::size_t>(l - 1)].size());
        }
        out.terms.push_back(std::move(term));
    }
    out.points = sg.points;
    return out;
}

template <class T>
class GridCore;

} // namespace

namespace detail {

class GridState {
public:
    virtual ~GridState() = default;
    virtual double correction(std::span<const double> x) const = 0;
    virtual double explained(std::span<const double> x) const = 0;
    GridLogLik loglik;
};

} // namespace detail

namespace {

template <class T>
class GridCore final : public detail::GridState {
public:
    GridCore(const ProductKernel& kern, Layout layout) : layout_(std::move(layout)) {
        if (kern.dim() != layout_.dim)
            fail(ErrorKind::Parameter, "kernel has " + std::to_string(kern.dim()) + " factors for a " +
                                           std::to_string(layout_.dim) + "-dimensional design");
        solvers_.resize(layout_.dim);
        for (std::size_t j = 0; j < layout_.dim; ++j)
            for (const auto& set : layout_.sets[j]) solvers_[j].emplace_back(kern.factor(j), set);
    }

    std::size_t size() const { return layout_.size(); }

    Vec<T> gather(const Layout::Term& term, std::span<const T> v) const {
        if (term.index.empty()) return Vec<T>(v.begin(), v.end());
        Vec<T> out(term.index.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[term.index[i]];
        return out;
    }

    // (x Phi_j^{-1}) v on one subgrid
    void solve_term(const Layout::Term& term, Vec<T>& v) const {
        for (std::size_t j = 0; j < layout_.dim; ++j) {
            const DimSolver<T>& s = solvers_[j][term.slot[j]];
            for_each_line<T>(term.shape, j, v, [&](Vec<T>& line) { s.solve_phi(line); });
        }
    }

    void apply_a_term(const Layout::Term& term, Vec<T>& v) const {
        for (std::size_t j = 0; j < layout_.dim; ++j) {
            const DimSolver<T>& s = solvers_[j][term.slot[j]];
            for_each_line<T>(term.shape, j, v, [&](Vec<T>& line) { s.apply_a(line); });
        }
    }

    /// K^{-1} v, summed over the weighted subgrids.
    Vec<T> apply_inverse(std::span<const T> v) const {
        Vec<T> out(v.size(), T(0));
        for (const auto& term : layout_.terms) {
            Vec<T> w = gather(term, v);
            solve_term(term, w);
            apply_a_term(term, w);
            for (std::size_t i = 0; i < w.size(); ++i)
                out[term.index.empty() ? i : term.index[i]] += T(term.coefficient) * w[i];
        }
        return out;
    }

    T logdet_k() const {
        if (!layout_.sparse) {
            const T n = T(static_cast<double>(size()));
            T sum = 0;
            for (std::size_t j = 0; j < layout_.dim; ++j) {
                const auto& s = solvers_[j][0];
                sum += n / T(static_cast<double>(s.size())) * s.logdet_k();
            }
            return sum;
        }
        // telescoping over every multi-index with |l| <= q, with det K at level 0 equal to 1
        const std::size_t levels = layout_.sets[0].size();
        std::vector<Vec<T>> ld(layout_.dim, Vec<T>(levels + 1, T(0)));
        std::vector<std::vector<double>> count(layout_.dim, std::vector<double>(levels + 1, 0.0));
        for (std::size_t j = 0; j < layout_.dim; ++j)
            for (std::size_t l = 1; l <= levels; ++l) {
                ld[j][l] = solvers_[j][l - 1].logdet_k();
                count[j][l] = static_cast<double>(solvers_[j][l - 1].size());
            }
        T total = 0;
        std::vector<std::size_t> idx(layout_.dim, 1);
        auto visit = [&](auto&& self, std::size_t j, int used) -> void {
            if (j == layout_.dim) {
                for (std::size_t a = 0; a < layout_.dim; ++a) {
                    double weight = 1.0;
                    for (std::size_t w = 0; w < layout_.dim; ++w)
                        if (w != a) weight *= count[w][idx[w]] - count[w][idx[w] - 1];
                    if (weight != 0.0) total += T(weight) * (ld[a][idx[a]] - ld[a][idx[a] - 1]);
                }
                return;
            }
            const int remaining = static_cast<int>(layout_.dim - j - 1);
            for (int l = 1; used + l + remaining <= layout_.q && static_cast<std::size_t>(l) <= levels; ++l) {
                idx[j] = static_cast<std::size_t>(l);
                self(self, j + 1, used + l);
            }
        };
        visit(visit, 0, 0);
        return total;
    }

    void set_residual(std::span<const T> r) {
        s_.clear();
        for (const auto& term : layout_.terms) {
            Vec<T> w = gather(term, r);
            solve_term(term, w);
            s_.push_back(std::move(w));
        }
    }

    double correction(std::span<const double> x) const override {
        RowCache rows(*this, x);
        T total = 0;
        for (std::size_t t = 0; t < layout_.terms.size(); ++t) {
            const auto& term = layout_.terms[t];
            total += T(term.coefficient) * contract(term, rows, s_[t]);
        }
        return detail::to_double(total);
    }

    double explained(std::span<const double> x) const override {
        std::vector<std::vector<std::optional<T>>> cache(layout_.dim);
        for (std::size_t j = 0; j < layout_.dim; ++j) cache[j].resize(solvers_[j].size());
        T total = 0;
        for (const auto& term : layout_.terms) {
            T prod = 1;
            for (std::size_t j = 0; j < layout_.dim; ++j) {
                auto& slot = cache[j][term.slot[j]];
                if (!slot) slot = solvers_[j][term.slot[j]].explained(x[j]);
                prod *= *slot;
            }
            total += T(term.coefficient) * prod;
        }
        return detail::to_double(total);
    }

private:
    struct RowCache {
        RowCache(const GridCore& core, std::span<const double> x) : core_(core), x_(x), rows_(core.layout_.dim) {
            for (std::size_t j = 0; j < core.layout_.dim; ++j) rows_[j].resize(core.solvers_[j].size());
        }
        const BasicBasisRow<T>& get(std::size_t j, std::size_t slot) {
            auto& r = rows_[j][slot];
            if (!r) r = core_.solvers_[j][slot].row(x_[j]);
            return *r;
        }
        const GridCore& core_;
        std::span<const double> x_;
        std::vector<std::vector<std::optional<BasicBasisRow<T>>>> rows_;
    };

    // (x_j phi_j(x_j))^T s over the nonzero tensor window
    T contract(const Layout::Term& term, RowCache& cache, const Vec<T>& s) const {
        const std::size_t d = layout_.dim;
        std::vector<const BasicBasisRow<T>*> rows(d);
        std::vector<std::size_t> stride(d, 1);
        for (std::size_t j = d; j-- > 0;) {
            rows[j] = &cache.get(j, term.slot[j]);
            if (j + 1 < d) stride[j] = stride[j + 1] * term.shape[j + 1];
        }
        T total = 0;
        auto walk = [&](auto&& self, std::size_t j, std::size_t offset, const T& weight) -> void {
            if (j == d) {
                total += weight * s[offset];
                return;
            }
            const auto& r = *rows[j];
            for (std::size_t w = 0; w < r.values.size(); ++w)
                self(self, j + 1, offset + (r.window_start + w) * stride[j], T(weight * r.values[w]));
        };
        walk(walk, 0, 0, T(1));
        return total;
    }

    Layout layout_;
    std::vector<std::vector<DimSolver<T>>> solvers_;
    std::vector<Vec<T>> s_;
};

Precision grid_precision(Precision requested, const ProductKernel& kern, const Layout& layout) {
    if (requested != Precision::Auto) return requested;
    Precision out = Precision::Double;
    for (std::size_t j = 0; j < layout.dim && j < kern.dim(); ++j)
        for (const auto& set : layout.sets[j])
            out = detail::wider(out, resolve_precision(Precision::Auto, kern.factor(j), set));
    return out;
}

template <class T>
Vec<T> residual(std::span<const double> y, const Eigen::MatrixXd& f, std::span<const double> beta) {
    Vec<T> r(y.begin(), y.end());
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index c = 0; c < f.cols(); ++c)
            r[static_cast<std::size_t>(i)] -= T(f(i, c)) * T(beta[static_cast<std::size_t>(c)]);
    return r;
}

template <class T>
std::vector<double> gls_beta(const GridCore<T>& core, const Eigen::MatrixXd& f, std::span<const double> y) {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    const std::size_t n = core.size();
    const Eigen::Index q = f.cols();
    if (q == 0) return {};
    Mat kinv_f(static_cast<Eigen::Index>(n), q);
    Vec<T> col(n);
    for (Eigen::Index c = 0; c < q; ++c) {
        for (std::size_t i = 0; i < n; ++i) col[i] = T(f(static_cast<Eigen::Index>(i), c));
        const Vec<T> w = core.apply_inverse(col);
        for (std::size_t i = 0; i < n; ++i) kinv_f(static_cast<Eigen::Index>(i), c) = w[i];
    }
    Mat gram = Mat(f.cast<T>().transpose()) * kinv_f;
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

struct GridFitCore {
    std::vector<double> beta;
    double sigma2 = 1.0;
    GridLogLik loglik;
    std::shared_ptr<const detail::GridState> state;
};

template <class T>
GridFitCore grid_fit_core(const ProductKernel& kern, Layout layout, std::span<const double> y,
                          const Eigen::MatrixXd& design, const GridFitOptions& options,
                          std::optional<double> sigma2_floor, bool* floored) {
    auto core = std::make_shared<GridCore<T>>(kern, std::move(layout));
    const std::size_t n = core->size();
    GridFitCore out;
    out.beta = options.beta ? *options.beta : gls_beta(*core, design, y);
    const Vec<T> r = residual<T>(y, design, out.beta);
    const Vec<T> kinv_r = core->apply_inverse(r);
    T quad = 0;
    for (std::size_t i = 0; i < n; ++i) quad += r[i] * kinv_r[i];
    out.sigma2 = options.sigma2 ? *options.sigma2 : detail::to_double(quad / T(static_cast<double>(n)));
    if (!options.sigma2 && sigma2_floor && !(out.sigma2 > *sigma2_floor)) {
        out.sigma2 = *sigma2_floor;
        if (floored) *floored = true;
    }
    const T logdet = core->logdet_k();
    const double nn = static_cast<double>(n);
    out.loglik.logdet_k = detail::to_double(logdet);
    out.loglik.quadratic = detail::to_double(quad);
    out.loglik.value = -0.5 * (nn * std::log(out.sigma2) + out.loglik.logdet_k +
                               detail::to_double(quad / T(out.sigma2)) + nn * std::log(2.0 * std::numbers::pi));
    core->set_residual(r);
    core->loglik = out.loglik;
    out.state = std::move(core);
    return out;
}

void check_grid_inputs(const ProductKernel& kern, const Layout& layout, std::span<const double> y,
                       const MeanModel& mean, const GridFitOptions& options) {
    if (kern.dim() != layout.dim)
        fail(ErrorKind::Parameter, "kernel has " + std::to_string(kern.dim()) + " factors for a " +
                                       std::to_string(layout.dim) + "-dimensional design");
    if (y.size() != layout.size())
        fail(ErrorKind::Data, "expected " + std::to_string(layout.size()) + " observations, got " +
                                  std::to_string(y.size()));
    for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::Data, "observations must be finite");
    if (options.beta && options.beta->size() != mean.size())
        fail(ErrorKind::Parameter, "expected " + std::to_string(mean.size()) + " mean coefficients");
    if (options.sigma2 && !(*options.sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
}

GridFitCore run_grid_fit(const ProductKernel& kern, const GridDesign& design, std::span<const double> y,
                         const MeanModel& mean, const GridFitOptions& options, Precision* used,
                         std::optional<double> sigma2_floor = std::nullopt, bool* floored = nullptr) {
    Layout layout = layout_of(design);
    check_grid_inputs(kern, layout, y, mean, options);
    const Eigen::MatrixXd f = mean.design(layout.points, layout.dim);
    const Precision resolved = grid_precision(options.precision, kern, layout);
    if (used) *used = resolved;
    return detail::dispatch(resolved, [&]<class T>() {
        return grid_fit_core<T>(kern, std::move(layout), y, f, options, sigma2_floor, floored);
    });
}

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

struct GridAccess {
    static const detail::GridState& state(const GridGpModel& m) { return *m.state_; }
};

std::size_t FullGridDesign::size() const noexcept {
    if (knots.empty()) return 0;
    std::size_t n = 1;
    for (const auto& k : knots) n *= k.size();
    return n;
}

std::vector<std::size_t> FullGridDesign::shape() const {
    std::vector<std::size_t> out;
    for (const auto& k : knots) out.push_back(k.size());
    return out;
}

std::vector<double> FullGridDesign::points() const {
    const std::size_t d = dim();
    const std::size_t n = size();
    std::vector<double> out(n * d);
    std::vector<std::size_t> multi(d, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = knots[j][multi[j]];
        for (std::size_t j = d; j-- > 0;) {
            if (++multi[j] < knots[j].size()) break;
            multi[j] = 0;
        }
    }
    return out;
}

std::size_t FullGridDesign::flat_index(std::span<const std::size_t> multi) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < dim(); ++j) idx = idx * knots[j].size() + multi[j];
    return idx;
}

FullGridDesign make_full_grid(std::vector<std::vector<double>> knots) {
    if (knots.empty()) fail(ErrorKind::Design, "grid needs at least one dimension");
    for (std::size_t j = 0; j < knots.size(); ++j)
        check_knot_set(knots[j], "knot set of dimension " + std::to_string(j + 1));
    return FullGridDesign{std::move(knots)};
}

NestedFamily dyadic_family() {
    return {"dyadic", [](int level) {
                if (level < 1 || level > 30) fail(ErrorKind::Parameter, "dyadic level must be in [1, 30]");
                const std::size_t count = (std::size_t{1} << level) - 1;
                std::vector<double> out(count);
                for (std::size_t i = 0; i < count; ++i) out[i] = std::ldexp(static_cast<double>(i + 1), -level);
                return out;
            }};
}

NestedFamily table_family(std::string name, std::vector<std::vector<double>> levels) {
    return {std::move(name), [levels = std::move(levels)](int level) {
                if (level < 1 || static_cast<std::size_t>(level) > levels.size())
                    fail(ErrorKind::Design, "family has no level " + std::to_string(level));
                return levels[static_cast<std::size_t>(level - 1)];
            }};
}

std::optional<NestedFamily> family_by_name(std::string_view name) {
    if (name == "dyadic") return dyadic_family();
    return std::nullopt;
}

FullGridDesign SparseGridDesign::subgrid_design(const SparseSubgrid& sub) const {
    FullGridDesign out;
    for (int l : sub.levels) out.knots.push_back(level_points.at(static_cast<std::size_t>(l - 1)));
    return out;
}

SparseGridDesign make_sparse_grid(std::size_t dim, int level, const NestedFamily& family) {
    if (dim < 1) fail(ErrorKind::Parameter, "sparse grid needs at least one dimension");
    if (level < 1) fail(ErrorKind::Parameter, "sparse grid level must be at least 1");
    if (!family.points) fail(ErrorKind::Parameter, "sparse grid family has no generator");
    SparseGridDesign out;
    out.dim = dim;
    out.level = level;
    out.family = family.name;
    for (int l = 1; l <= level; ++l) {
        auto pts = family.points(l);
        check_knot_set(pts, "level " + std::to_string(l) + " of family " + family.name);
        if (l > 1) {
            const auto& prev = out.level_points.back();
            for (double v : prev)
                if (!std::binary_search(pts.begin(), pts.end(), v))
                    fail(ErrorKind::Design, "family " + family.name + " is not nested at level " + std::to_string(l));
        }
        out.level_points.push_back(std::move(pts));
    }

    const int d = static_cast<int>(dim);
    const int q = level + d - 1;
    std::vector<int> levels(dim, 1);
    auto enumerate = [&](auto&& self, std::size_t j, int used) -> void {
        const int remaining = d - static_cast<int>(j) - 1;
        if (j == dim) {
            if (used >= q - d + 1) {
                SparseSubgrid sub;
                sub.levels = levels;
                const int gap = q - used;
                sub.coefficient = static_cast<int>((gap % 2 == 0 ? 1 : -1) * binomial(d - 1, gap));
                out.subgrids.push_back(std::move(sub));
            }
            return;
        }
        for (int l = 1; used + l + remaining <= q; ++l) {
            levels[j] = l;
            self(self, j + 1, used + l);
        }
    };
    enumerate(enumerate, 0, 0);

    std::map<std::vector<double>, std::size_t> lookup;
    std::vector<std::vector<double>> sub_points;
    for (const auto& sub : out.subgrids) {
        const auto pts = out.subgrid_design(sub).points();
        for (std::size_t i = 0; i < pts.size(); i += dim)
            lookup.emplace(std::vector<double>(pts.begin() + static_cast<std::ptrdiff_t>(i),
                                               pts.begin() + static_cast<std::ptrdiff_t>(i + dim)),
                           0);
    }
    std::size_t next = 0;
    for (auto& [pt, idx] : lookup) {
        idx = next++;
        out.points.insert(out.points.end(), pt.begin(), pt.end());
    }
    for (auto& sub : out.subgrids) {
        const auto pts = out.subgrid_design(sub).points();
        sub.index.reserve(pts.size() / dim);
        for (std::size_t i = 0; i < pts.size(); i += dim)
            sub.index.push_back(lookup.at(std::vector<double>(pts.begin() + static_cast<std::ptrdiff_t>(i),
                                                              pts.begin() + static_cast<std::ptrdiff_t>(i + dim))));
    }
    return out;
}

std::string write_sparse_manifest(const SparseGridDesign& design) {
    std::string out = "# kpgp sparse grid manifest\n";
    out += "family " + design.family + "\n";
    out += "dim " + std::to_string(design.dim) + "\n";
    out += "level " + std::to_string(design.level) + "\n";
    for (std::size_t l = 0; l < design.level_points.size(); ++l) {
        out += "level_points " + std::to_string(l + 1) + " " + std::to_string(design.level_points[l].size());
        for (double v : design.level_points[l]) out += " " + format_double(v);
        out += "\n";
    }
    for (const auto& sub : design.subgrids) {
        out += "subgrid " + std::to_string(sub.coefficient);
        for (int l : sub.levels) out += " " + std::to_string(l);
        out += "\n";
    }
    out += "points " + std::to_string(design.size()) + "\n";
    for (std::size_t i = 0; i < design.size(); ++i) {
        out += "point";
        for (std::size_t j = 0; j < design.dim; ++j) out += " " + format_double(design.points[i * design.dim + j]);
        out += "\n";
    }
    return out;
}

SparseGridDesign read_sparse_manifest(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string family;
    std::size_t dim = 0;
    int level = 0;
    std::vector<std::vector<double>> levels;
    std::vector<std::pair<int, std::vector<int>>> subgrids;
    std::vector<double> points;
    std::size_t expected_points = 0;
    int line_no = 0;
    auto bad = [&](const std::string& why) {
        fail(ErrorKind::Design, "manifest line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "family") {
            ls >> family;
        } else if (key == "dim") {
            if (!(ls >> dim)) bad("bad dim");
        } else if (key == "level") {
            if (!(ls >> level)) bad("bad level");
        } else if (key == "level_points") {
            std::size_t l = 0, count = 0;
            if (!(ls >> l >> count) || l != levels.size() + 1) bad("level_points out of order");
            std::vector<double> pts(count);
            for (double& v : pts)
                if (!(ls >> v)) bad("too few level points");
            levels.push_back(std::move(pts));
        } else if (key == "subgrid") {
            int coef = 0;
            if (!(ls >> coef)) bad("bad subgrid coefficient");
            std::vector<int> ls_levels;
            int l = 0;
            while (ls >> l) ls_levels.push_back(l);
            subgrids.emplace_back(coef, std::move(ls_levels));
        } else if (key == "points") {
            if (!(ls >> expected_points)) bad("bad point count");
        } else if (key == "point") {
            double v = 0;
            std::size_t got = 0;
            while (ls >> v) {
                points.push_back(v);
                ++got;
            }
            if (got != dim) bad("point has " + std::to_string(got) + " coordinates");
        } else {
            bad("unknown key '" + key + "'");
        }
    }
    if (dim == 0 || level < 1 || family.empty()) fail(ErrorKind::Design, "manifest lacks family, dim or level");
    if (levels.size() != static_cast<std::size_t>(level))
        fail(ErrorKind::Design, "manifest lists " + std::to_string(levels.size()) + " levels, expected " +
                                    std::to_string(level));
    SparseGridDesign design = make_sparse_grid(dim, level, table_family(family, std::move(levels)));
    bool same = design.subgrids.size() == subgrids.size() && points == design.points &&
                expected_points == design.size();
    for (std::size_t i = 0; same && i < subgrids.size(); ++i)
        same = subgrids[i].first == design.subgrids[i].coefficient && subgrids[i].second == design.subgrids[i].levels;
    if (!same) fail(ErrorKind::Design, "manifest subgrids or points do not match its level sets");
    return design;
}

std::vector<double> kron_solve(std::span<const BandedFactorization> factors, std::span<const double> v) {
    std::vector<std::size_t> shape;
    for (const auto& f : factors) shape.push_back(f.n());
    if (shape.empty() || product(shape) != v.size())
        fail(ErrorKind::Parameter, "vector length does not match the product of the factor sizes");
    std::vector<double> out(v.begin(), v.end());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        std::size_t stride = 1;
        for (std::size_t i = j + 1; i < shape.size(); ++i) stride *= shape[i];
        const std::size_t outer = out.size() / (shape[j] * stride);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < stride; ++in)
                factors[j].solve_strided(out.data() + o * shape[j] * stride + in, stride);
    }
    return out;
}

std::size_t design_dim(const GridDesign& design) {
    if (const auto* full = std::get_if<FullGridDesign>(&design)) return full->dim();
    return std::get<SparseGridDesign>(design).dim;
}

std::vector<double> design_points(const GridDesign& design) {
    if (const auto* full = std::get_if<FullGridDesign>(&design)) return full->points();
    return std::get<SparseGridDesign>(design).points;
}

GridGpModel fit_grid(const ProductKernel& kern, const GridDesign& design, std::vector<double> y,
                     const MeanModel& mean, const GridFitOptions& options) {
    GridGpModel model(kern);
    GridFitCore core = run_grid_fit(kern, design, y, mean, options, &model.precision_);
    model.mean_ = mean;
    model.points_ = design_points(design);
    model.y_ = std::move(y);
    model.beta_ = std::move(core.beta);
    model.sigma2_ = core.sigma2;
    model.sparse_ = std::holds_alternative<SparseGridDesign>(design);
    model.state_ = std::move(core.state);
    return model;
}

GridGpModel fit_full_grid(const ProductKernel& kern, const FullGridDesign& design, std::vector<double> y,
                          const MeanModel& mean, const GridFitOptions& options) {
    return fit_grid(kern, GridDesign{design}, std::move(y), mean, options);
}

GridGpModel fit_sparse_grid(const ProductKernel& kern, const SparseGridDesign& design, std::vector<double> y,
                            const MeanModel& mean, const GridFitOptions& options) {
    return fit_grid(kern, GridDesign{design}, std::move(y), mean, options);
}

GridPrediction predict_grid(const GridGpModel& model, std::span<const double> xstars) {
    const std::size_t d = model.dim();
    if (xstars.size() % d != 0) fail(ErrorKind::Parameter, "prediction buffer length is not a multiple of the dimension");
    const std::size_t m = xstars.size() / d;
    const auto& state = GridAccess::state(model);
    GridPrediction out;
    out.mean.resize(m);
    out.variance.resize(m);
    for (std::size_t t = 0; t < m; ++t) {
        const auto x = xstars.subspan(t * d, d);
        out.mean[t] = model.mean_model().mean(x, model.beta()) + state.correction(x);
        double var = model.sigma2() * (1.0 - state.explained(x));
        if (var < 0.0) {
            if (var < -1e-10 * model.sigma2())
                fail(ErrorKind::NumericalBreakdown, "negative posterior variance " + std::to_string(var));
            var = 0.0;
        }
        out.variance[t] = var;
    }
    return out;
}

GridPrediction predict_sparse_grid(const ProductKernel& kern, const SparseGridDesign& design, std::vector<double> y,
                                   std::span<const double> xstars, const MeanModel& mean) {
    return predict_grid(fit_sparse_grid(kern, design, std::move(y), mean), xstars);
}

GridLogLik grid_loglik(const GridGpModel& model) { return GridAccess::state(model).loglik; }

GridLogLik full_grid_loglik(const ProductKernel& kern, const FullGridDesign& design, std::span<const double> y,
                            const MeanModel& mean, std::span<const double> beta, double sigma2, Precision precision) {
    if (!(sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
    GridFitOptions opts;
    opts.beta = std::vector<double>(beta.begin(), beta.end());
    opts.sigma2 = sigma2;
    opts.precision = precision;
    return run_grid_fit(kern, GridDesign{design}, y, mean, opts, nullptr).loglik;
}

GridLogLik sparse_grid_loglik(const ProductKernel& kern, const SparseGridDesign& design, std::span<const double> y,
                              const MeanModel& mean, std::span<const double> beta, double sigma2,
                              Precision precision) {
    if (!(sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be positive");
    GridFitOptions opts;
    opts.beta = std::vector<double>(beta.begin(), beta.end());
    opts.sigma2 = sigma2;
    opts.precision = precision;
    return run_grid_fit(kern, GridDesign{design}, y, mean, opts, nullptr).loglik;
}

ProfilePoint profile_loglik_grid(int p, double omega, const GridDesign& design, std::span<const double> y,
                                 const MeanModel& mean, Precision precision) {
    const ProductKernel kern = ProductKernel::isotropic(design_dim(design), p, omega);
    double mean_square = 0.0;
    for (double v : y) mean_square += v * v;
    mean_square /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
    const double floor = kSigma2Floor * std::max(mean_square, std::numeric_limits<double>::min());
    GridFitOptions opts;
    opts.precision = precision;
    ProfilePoint out;
    const GridFitCore core = run_grid_fit(kern, design, y, mean, opts, nullptr, floor, &out.sigma2_floored);
    out.beta = core.beta;
    out.sigma2 = core.sigma2;
    out.loglik = core.loglik.value;
    out.terms.value = core.loglik.value;
    out.terms.quadratic = core.loglik.quadratic;
    out.terms.logdet_m = core.loglik.logdet_k;
    return out;
}

MleResult profile_mle_grid(int p, const GridDesign& design, std::span<const double> y, const MeanModel& mean,
                           const MleOptions& options) {
    const std::vector<double> pts = design_points(design);
    const std::size_t d = design_dim(design);
    double range = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = j; i < pts.size(); i += d) {
            lo = std::min(lo, pts[i]);
            hi = std::max(hi, pts[i]);
        }
        range = std::max(range, hi - lo);
    }
    const double lo = options.omega_lower.value_or(0.01 * range);
    const double hi = options.omega_upper.value_or(10.0 * range);
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) fail(ErrorKind::Parameter, "invalid omega search bounds");
    if (options.starts < 1) fail(ErrorKind::Parameter, "need at least one optimizer start");
    const double log_lo = std::log(lo), log_hi = std::log(hi);

    auto objective = [&](double log_omega) {
        try {
            return profile_loglik_grid(p, std::exp(log_omega), design, y, mean, options.precision).loglik;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Data || e.kind() == ErrorKind::Parameter || e.kind() == ErrorKind::Design ||
                e.kind() == ErrorKind::CollinearRegressors)
                throw;
            return -std::numeric_limits<double>::infinity();
        }
    };

    MleResult result;
    double best = -std::numeric_limits<double>::infinity();
    double best_log_omega = 0.0;
    const double width = (log_hi - log_lo) / options.starts;
    for (int s = 0; s < options.starts; ++s) {
        const double a = log_lo + s * width;
        const auto opt = golden_section_maximize(objective, a, a + width, options.tolerance, options.max_iterations);
        result.iterations += opt.iterations;
        result.evaluations += opt.evaluations;
        if (opt.value > best) {
            best = opt.value;
            best_log_omega = opt.x[0];
            result.converged = opt.converged;
        }
    }
    if (!std::isfinite(best)) fail(ErrorKind::OptimizationFailure, "no start produced a finite log likelihood");
    const ProfilePoint at = profile_loglik_grid(p, std::exp(best_log_omega), design, y, mean, options.precision);
    result.omega_hat = std::exp(best_log_omega);
    result.sigma2_hat = at.sigma2;
    result.beta_hat = at.beta;
    result.loglik_value = at.loglik;
    const double edge = 10.0 * options.tolerance;
    result.boundary = at.sigma2_floored || best_log_omega - log_lo <= edge || log_hi - best_log_omega <= edge;
    return result;
}

} // namespace kpgp
