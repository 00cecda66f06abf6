#include "kpgp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kpgp {

namespace {

// Non-finite objective values rank below every finite one.
double finite_or_worst(double v) { return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity(); }

} // namespace

OptimumResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi, double tol,
                                      int max_iterations) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    OptimumResult out;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = finite_or_worst(f(x1));
    double f2 = finite_or_worst(f(x2));
    out.evaluations = 2;
    while (b - a > tol && out.iterations < max_iterations) {
        ++out.iterations;
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = finite_or_worst(f(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = finite_or_worst(f(x2));
        }
        ++out.evaluations;
    }
    out.converged = b - a <= tol;
    // the bracket ends are candidates too, so an optimum on the bound is reported exactly
    double best_x = f1 >= f2 ? x1 : x2;
    double best_f = std::max(f1, f2);
    for (double edge : {lo, hi}) {
        if (std::fabs(edge - best_x) <= 2.0 * tol) {
            const double fe = finite_or_worst(f(edge));
            ++out.evaluations;
            if (fe > best_f) {
                best_f = fe;
                best_x = edge;
            }
        }
    }
    out.x = {best_x};
    out.value = best_f;
    return out;
}

OptimumResult nelder_mead_maximize(const std::function<double(const std::vector<double>&)>& f,
                                   std::vector<double> start, const std::vector<double>& lower,
                                   const std::vector<double>& upper, double initial_step, double tol,
                                   int max_iterations) {
    const std::size_t dim = start.size();
    auto clamp = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    };
    OptimumResult out;
    auto eval = [&](const std::vector<double>& x) {
        ++out.evaluations;
        return finite_or_worst(f(x));
    };

    clamp(start);
    std::vector<std::vector<double>> simplex(dim + 1, start);
    for (std::size_t i = 0; i < dim; ++i) {
        simplex[i + 1][i] += initial_step;
        if (simplex[i + 1][i] > upper[i]) simplex[i + 1][i] = start[i] - initial_step;
        clamp(simplex[i + 1]);
    }
    std::vector<double> values(dim + 1);
    for (std::size_t v = 0; v <= dim; ++v) values[v] = eval(simplex[v]);

    std::vector<std::size_t> order(dim + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] > values[r]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> v2;
        for (std::size_t i : order) {
            s2.push_back(simplex[i]);
            v2.push_back(values[i]);
        }
        simplex = std::move(s2);
        values = std::move(v2);
    };
    auto spread = [&] {
        double worst = 0.0;
        for (std::size_t v = 1; v <= dim; ++v)
            for (std::size_t i = 0; i < dim; ++i) worst = std::max(worst, std::fabs(simplex[v][i] - simplex[0][i]));
        return worst;
    };

    sort_simplex();
    while (out.iterations < max_iterations && spread() > tol) {
        ++out.iterations;
        std::vector<double> centroid(dim, 0.0);
        for (std::size_t v = 0; v < dim; ++v)
            for (std::size_t i = 0; i < dim; ++i) centroid[i] += simplex[v][i] / static_cast<double>(dim);
        auto along = [&](double t) {
            std::vector<double> x(dim);
            for (std::size_t i = 0; i < dim; ++i) x[i] = centroid[i] + t * (simplex[dim][i] - centroid[i]);
            clamp(x);
            return x;
        };
        const auto reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr > values[0]) {
            const auto expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe > fr) {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if (fr > values[dim - 1]) {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            const bool outside = fr > values[dim];
            const auto contracted = along(outside ? -0.5 : 0.5);
            const double fc = eval(contracted);
            if (fc > std::max(fr, values[dim]) || (!outside && fc > values[dim])) {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                for (std::size_t v = 1; v <= dim; ++v) {
                    for (std::size_t i = 0; i < dim; ++i) simplex[v][i] = simplex[0][i] + 0.5 * (simplex[v][i] - simplex[0][i]);
                    values[v] = eval(simplex[v]);
                }
            }
        }
        sort_simplex();
    }
    out.converged = spread() <= tol;
    out.x = simplex[0];
    out.value = values[0];
    return out;
}

} // namespace kpgp
