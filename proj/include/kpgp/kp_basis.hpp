#pragma once

#include "kpgp/banded.hpp"
#include "kpgp/matern.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kpgp {

/// Support shape of a kernel packet: (-inf, a_s], [a_1, a_k] or [a_1, +inf).
enum class KpKind { Left, Central, Right };

const char* to_string(KpKind kind);

/**
 * Coefficients A_1..A_s of phi(x) = sum_j A_j K(x, a_j). The free scale is
 * fixed by max_j |A_j| = 1 with the first nonzero coefficient positive.
 */
struct KpCoefficients {
    std::vector<double> knots;
    std::vector<double> coeffs;
    KpKind kind = KpKind::Central;
};

/// Compactly supported packet on k = 2p + 3 strictly increasing knots.
KpCoefficients central_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a);

/// Packet supported on [a_1, +inf); (k + 1)/2 <= s <= k - 1 knots.
KpCoefficients right_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a);

/// Packet supported on (-inf, a_s]; (k + 1)/2 <= s <= k - 1 knots.
KpCoefficients left_kp_coefficients(const HalfIntegerMatern& kern, std::span<const double> a);

/**
 * Singular values (descending) of the equilibrated homogeneous system whose
 * null space defines a packet of the given kind on knots `a`. For a central
 * system any number of knots is accepted, which is how the minimal-degree
 * property is probed.
 */
std::vector<double> kp_system_singular_values(const HalfIntegerMatern& kern, std::span<const double> a,
                                              KpKind kind);

/// sum_j A_j K(x, a_j), summed term by term.
double kp_value_direct(const HalfIntegerMatern& kern, std::span<const double> knots,
                       std::span<const double> coeffs, double x);

/**
 * Same function, evaluated through whichever of the direct sum and the
 * one-sided odd-part identities carries the least cancellation. Exactly zero
 * outside the support.
 */
double kp_value(const HalfIntegerMatern& kern, std::span<const double> knots, std::span<const double> coeffs,
                KpKind kind, double x);

/// Nonzero basis values at a point: phi_{window_start + t}(x) = values[t].
template <class T>
struct BasicBasisRow {
    std::size_t window_start = 0;
    std::ptrdiff_t interval = -1; ///< located knot interval, reusable as a hint
    std::vector<T> values;
};

/**
 * KP basis on sorted knots x_1 < ... < x_n, realizing K A = Phi with A of
 * bandwidth (k-1)/2 and Phi of bandwidth (k-3)/2. Column j of A holds the
 * coefficients of phi_j on knots max(0, j-m) .. min(n-1, j+m), m = (k-1)/2;
 * the first m columns are left-sided, the last m right-sided. T is the
 * working precision of the coefficients and of Phi.
 */
template <class T>
class BasicKpBasis {
public:
    const HalfIntegerMatern& kernel() const noexcept { return kernel_; }
    const MaternEvaluator<T>& evaluator() const noexcept { return eval_; }
    std::span<const double> knots() const noexcept { return knots_; }
    std::size_t size() const noexcept { return knots_.size(); }
    const BasicBandedMatrix<T>& a() const noexcept { return a_; }
    const BasicBandedMatrix<T>& phi() const noexcept { return phi_; }
    bool equally_spaced() const noexcept { return equally_spaced_; }

    KpKind kind(std::size_t j) const noexcept;

    /// First knot index used by basis function j.
    std::size_t window_start(std::size_t j) const noexcept;
    /// Number of knots used by basis function j.
    std::size_t window_length(std::size_t j) const noexcept;
    std::vector<T> coefficients(std::size_t j) const;

    /// phi_j(x).
    T value(std::size_t j, double x) const;

    /// Index i with knots[i] <= x < knots[i+1]; -1 below the first knot, n-1 at or above the last.
    std::ptrdiff_t locate(double x, std::optional<std::ptrdiff_t> hint = std::nullopt) const;

    /// Multiplies column j of A and Phi by `factor`.
    void rescale_column(std::size_t j, const T& factor);

    /// Bytes held by knots, A and Phi.
    std::size_t storage_bytes() const noexcept {
        return knots_.capacity() * sizeof(double) + a_.storage_bytes() + phi_.storage_bytes();
    }

private:
    template <class U>
    friend BasicKpBasis<U> build_basis_as(const HalfIntegerMatern& kern, std::vector<double> knots);

    explicit BasicKpBasis(const HalfIntegerMatern& kern) : kernel_(kern), eval_(kern.p(), kern.omega()) {}

    HalfIntegerMatern kernel_;
    MaternEvaluator<T> eval_;
    std::vector<double> knots_;
    BasicBandedMatrix<T> a_;
    BasicBandedMatrix<T> phi_;
    bool equally_spaced_ = false;
    double spacing_ = 0.0;
};

using KpBasis = BasicKpBasis<double>;
using BasisRow = BasicBasisRow<double>;

/// Relative tolerance on consecutive gaps for the equally spaced fast path.
inline constexpr double kEqualSpacingTolerance = 1e-12;

/// Basis built and stored in working precision T.
template <class T>
BasicKpBasis<T> build_basis_as(const HalfIntegerMatern& kern, std::vector<double> knots);

KpBasis build_basis(const HalfIntegerMatern& kern, std::vector<double> knots);

/// Basis values at x; `hint` is a previously located interval index used as a warm start.
template <class T>
BasicBasisRow<T> evaluate_basis_row(const BasicKpBasis<T>& basis, double x,
                                    std::optional<std::ptrdiff_t> hint = std::nullopt);

/// Text table, one row per basis function: j kind window_start window_len coeffs...
std::string format_basis_table(const KpBasis& basis);

} // namespace kpgp
