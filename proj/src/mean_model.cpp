#include "kpgp/mean_model.hpp"

#include "kpgp/error.hpp"

#include <cmath>

namespace kpgp {

MeanModel::MeanModel(std::vector<Regressor> regressors, std::string name)
    : regressors_(std::move(regressors)), name_(std::move(name)) {}

MeanModel MeanModel::none() { return {}; }

MeanModel MeanModel::constant() {
    return MeanModel({[](std::span<const double>) { return 1.0; }}, "constant");
}

MeanModel MeanModel::polynomial(int degree) {
    if (degree < 0) fail(ErrorKind::Parameter, "polynomial mean degree must be nonnegative");
    std::vector<Regressor> fs;
    for (int d = 0; d <= degree; ++d)
        fs.emplace_back([d](std::span<const double> x) { return std::pow(x[0], d); });
    return MeanModel(std::move(fs), "polynomial" + std::to_string(degree));
}

std::vector<double> MeanModel::row(std::span<const double> x) const {
    std::vector<double> out(regressors_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = regressors_[i](x);
    return out;
}

Eigen::MatrixXd MeanModel::design(std::span<const double> points, std::size_t dim) const {
    if (dim == 0 || points.size() % dim != 0)
        fail(ErrorKind::Parameter, "point buffer length is not a multiple of the dimension");
    const std::size_t n = points.size() / dim;
    Eigen::MatrixXd f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < size(); ++q)
            f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = regressors_[q](points.subspan(i * dim, dim));
    return f;
}

double MeanModel::mean(std::span<const double> x, std::span<const double> beta) const {
    if (beta.size() != size())
        fail(ErrorKind::Parameter, "mean coefficients: expected " + std::to_string(size()) + ", got " +
                                       std::to_string(beta.size()));
    double mu = 0.0;
    for (std::size_t q = 0; q < size(); ++q) mu += beta[q] * regressors_[q](x);
    return mu;
}

} // namespace kpgp
