#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace kpgp {

/// A regression function f(x) evaluated at a d-dimensional point.
using Regressor = std::function<double(std::span<const double>)>;

/// Linear mean mu(x) = sum_i beta_i f_i(x). An empty model means a zero mean.
class MeanModel {
public:
    MeanModel() = default;
    MeanModel(std::vector<Regressor> regressors, std::string name);

    static MeanModel none();
    static MeanModel constant();
    /// 1, x, ..., x^degree on the first coordinate.
    static MeanModel polynomial(int degree);

    std::size_t size() const noexcept { return regressors_.size(); }
    const std::string& name() const noexcept { return name_; }

    /// f(x) for one point.
    std::vector<double> row(std::span<const double> x) const;

    /// n x q matrix of regressor values; `points` holds n points of dimension `dim` back to back.
    Eigen::MatrixXd design(std::span<const double> points, std::size_t dim) const;

    /// f(x)^T beta.
    double mean(std::span<const double> x, std::span<const double> beta) const;

private:
    std::vector<Regressor> regressors_;
    std::string name_ = "none";
};

} // namespace kpgp
