#pragma once

#include "kpgp/banded.hpp"
#include "kpgp/gp1d.hpp"
#include "kpgp/matern.hpp"
#include "kpgp/mean_model.hpp"
#include "kpgp/precision.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kpgp {

/**
 * Cartesian product of one-dimensional knot sets. Points are flattened
 * lexicographically with the last dimension varying fastest, which is the
 * ordering of the Kronecker products K_1 x ... x K_d.
 */
struct FullGridDesign {
    std::vector<std::vector<double>> knots;

    std::size_t dim() const noexcept { return knots.size(); }
    std::size_t size() const noexcept;
    std::vector<std::size_t> shape() const;
    /// All points back to back, dim() coordinates each.
    std::vector<double> points() const;
    /// Flat index of a multi-index.
    std::size_t flat_index(std::span<const std::size_t> multi) const;
};

/// Checks that every dimension has strictly increasing, finite knots.
FullGridDesign make_full_grid(std::vector<std::vector<double>> knots);

/// Nested one-dimensional point sets X_1 c X_2 c ..., indexed from level 1.
struct NestedFamily {
    std::string name;
    std::function<std::vector<double>(int level)> points;
};

/// X_l = {i 2^-l : i = 1 .. 2^l - 1}.
NestedFamily dyadic_family();

/// Family backed by explicit point sets, levels[l - 1] = X_l.
NestedFamily table_family(std::string name, std::vector<std::vector<double>> levels);

/// Family registered under `name` ("dyadic"), if any.
std::optional<NestedFamily> family_by_name(std::string_view name);

struct SparseSubgrid {
    std::vector<int> levels;         ///< l_1 .. l_d, each >= 1
    int coefficient = 0;             ///< (-1)^(q - |l|) C(d - 1, q - |l|)
    std::vector<std::size_t> index;  ///< subgrid flat index -> union point index
};

/**
 * Union of the full grids X_l with |l| <= q = level + dim - 1, with the
 * subgrids and coefficients of the combination technique (q - d + 1 <= |l| <= q).
 * Union points are sorted lexicographically.
 */
struct SparseGridDesign {
    std::size_t dim = 0;
    int level = 0;
    std::string family;
    std::vector<std::vector<double>> level_points; ///< level_points[l - 1] = X_l, up to the largest level used
    std::vector<SparseSubgrid> subgrids;
    std::vector<double> points; ///< union, dim coordinates each

    std::size_t size() const noexcept { return dim == 0 ? 0 : points.size() / dim; }
    /// X_{levels_1} x ... x X_{levels_d}.
    FullGridDesign subgrid_design(const SparseSubgrid& sub) const;
};

SparseGridDesign make_sparse_grid(std::size_t dim, int level, const NestedFamily& family);

/// Text manifest with family, level, dimension, per-level point sets, subgrids and union points.
std::string write_sparse_manifest(const SparseGridDesign& design);
SparseGridDesign read_sparse_manifest(std::string_view text);

/// (Phi_1^{-1} x ... x Phi_d^{-1}) v by one sweep of independent banded solves per dimension.
std::vector<double> kron_solve(std::span<const BandedFactorization> factors, std::span<const double> v);

using GridDesign = std::variant<FullGridDesign, SparseGridDesign>;

std::size_t design_dim(const GridDesign& design);
std::vector<double> design_points(const GridDesign& design);

namespace detail {
class GridState;
}

struct GridFitOptions {
    std::optional<std::vector<double>> beta; ///< nullopt: generalized least squares estimate
    std::optional<double> sigma2;            ///< nullopt: profile estimate r^T K^{-1} r / n
    Precision precision = Precision::Auto;
};

/// Noiseless GP on a full or sparse grid.
class GridGpModel {
public:
    const ProductKernel& kernel() const noexcept { return kernel_; }
    std::size_t dim() const noexcept { return kernel_.dim(); }
    std::size_t size() const noexcept { return y_.size(); }
    const MeanModel& mean_model() const noexcept { return mean_; }
    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> y() const noexcept { return y_; }
    std::span<const double> beta() const noexcept { return beta_; }
    double sigma2() const noexcept { return sigma2_; }
    Precision precision() const noexcept { return precision_; }
    bool sparse() const noexcept { return sparse_; }

private:
    friend GridGpModel fit_grid(const ProductKernel&, const GridDesign&, std::vector<double>, const MeanModel&,
                                const GridFitOptions&);
    friend struct GridAccess;

    explicit GridGpModel(const ProductKernel& kern) : kernel_(kern) {}

    ProductKernel kernel_;
    MeanModel mean_;
    std::vector<double> points_;
    std::vector<double> y_;
    std::vector<double> beta_;
    double sigma2_ = 1.0;
    Precision precision_ = Precision::Double;
    bool sparse_ = false;
    std::shared_ptr<const detail::GridState> state_;
};

/// y holds one value per design point, in design_points() order.
GridGpModel fit_grid(const ProductKernel& kern, const GridDesign& design, std::vector<double> y,
                     const MeanModel& mean, const GridFitOptions& options = {});

GridGpModel fit_full_grid(const ProductKernel& kern, const FullGridDesign& design, std::vector<double> y,
                          const MeanModel& mean, const GridFitOptions& options = {});

GridGpModel fit_sparse_grid(const ProductKernel& kern, const SparseGridDesign& design, std::vector<double> y,
                            const MeanModel& mean, const GridFitOptions& options = {});

struct GridPrediction {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Posterior mean and variance at points given back to back.
GridPrediction predict_grid(const GridGpModel& model, std::span<const double> xstars);

GridPrediction predict_sparse_grid(const ProductKernel& kern, const SparseGridDesign& design, std::vector<double> y,
                                   std::span<const double> xstars, const MeanModel& mean = MeanModel::none());

struct GridLogLik {
    double value = 0.0;
    double logdet_k = 0.0;  ///< log det K
    double quadratic = 0.0; ///< r^T K^{-1} r
};

/// Log density of the model's data at its own beta and sigma2.
GridLogLik grid_loglik(const GridGpModel& model);

GridLogLik full_grid_loglik(const ProductKernel& kern, const FullGridDesign& design, std::span<const double> y,
                            const MeanModel& mean, std::span<const double> beta, double sigma2,
                            Precision precision = Precision::Auto);

GridLogLik sparse_grid_loglik(const ProductKernel& kern, const SparseGridDesign& design, std::span<const double> y,
                              const MeanModel& mean, std::span<const double> beta, double sigma2,
                              Precision precision = Precision::Auto);

/// Profile log likelihood with one scale omega shared by all dimensions.
ProfilePoint profile_loglik_grid(int p, double omega, const GridDesign& design, std::span<const double> y,
                                 const MeanModel& mean, Precision precision = Precision::Auto);

/// Golden-section profile MLE of the shared omega; nugget options are ignored.
MleResult profile_mle_grid(int p, const GridDesign& design, std::span<const double> y, const MeanModel& mean,
                           const MleOptions& options = {});

} // namespace kpgp
