#pragma once

#include <functional>
#include <vector>

namespace kpgp {

struct OptimumResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Maximizes f on [lo, hi] by golden-section search until the bracket is shorter than tol.
OptimumResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi, double tol,
                                      int max_iterations);

/**
 * Maximizes f over the box [lower, upper] with Nelder-Mead from `start`;
 * trial points are clamped into the box. Stops when every vertex lies within
 * tol of the best one in each coordinate.
 */
OptimumResult nelder_mead_maximize(const std::function<double(const std::vector<double>&)>& f,
                                   std::vector<double> start, const std::vector<double>& lower,
                                   const std::vector<double>& upper, double initial_step, double tol,
                                   int max_iterations);

} // namespace kpgp
