#pragma once

#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

namespace kpgp {

/**
 * Square matrix stored by diagonals: entry (i, j) lives in column j at band
 * row ku + i - j, so only (kl + ku + 1) * n values are kept. Entries outside
 * the band are zero by representation.
 *
 * Instantiated for double (the public BandedMatrix), long double and the
 * library's internal quad type.
 */
template <class T>
class BasicBandedMatrix {
public:
    BasicBandedMatrix() = default;
    BasicBandedMatrix(std::size_t n, std::size_t kl, std::size_t ku);

    static BasicBandedMatrix identity(std::size_t n);

    std::size_t n() const noexcept { return n_; }
    std::size_t kl() const noexcept { return kl_; }
    std::size_t ku() const noexcept { return ku_; }

    bool in_band(std::size_t i, std::size_t j) const noexcept {
        return i < n_ && j < n_ && j <= i + ku_ && i <= j + kl_;
    }

    /// Value at (i, j); zero outside the band.
    T operator()(std::size_t i, std::size_t j) const {
        return in_band(i, j) ? bands_[j * ld() + ku_ + i - j] : T(0);
    }

    /// Writable in-band entry. Throws a parameter error outside the band.
    T& at(std::size_t i, std::size_t j);

    std::size_t ld() const noexcept { return kl_ + ku_ + 1; }
    std::span<const T> bands() const noexcept { return bands_; }
    std::span<T> bands() noexcept { return bands_; }

    /// Bytes held by the band storage.
    std::size_t storage_bytes() const noexcept { return bands_.capacity() * sizeof(T); }

    /// Smallest bandwidths that still hold every nonzero entry.
    std::size_t effective_kl() const;
    std::size_t effective_ku() const;

    /// Same entries converted to another scalar type.
    template <class U>
    BasicBandedMatrix<U> cast() const {
        BasicBandedMatrix<U> out(n_, kl_, ku_);
        auto dst = out.bands();
        for (std::size_t t = 0; t < bands_.size(); ++t) dst[t] = static_cast<U>(bands_[t]);
        return out;
    }

private:
    std::size_t n_ = 0;
    std::size_t kl_ = 0;
    std::size_t ku_ = 0;
    std::vector<T> bands_;
};

template <class T>
class BasicBandedFactorization;

template <class T>
BasicBandedFactorization<T> band_lu(const BasicBandedMatrix<T>& b);

/**
 * LU factorization with partial pivoting, LAPACK gbtrf layout: the upper
 * factor gains kl extra superdiagonals of fill-in, multipliers of the unit
 * lower factor are kept below the diagonal of each column.
 */
template <class T>
class BasicBandedFactorization {
public:
    std::size_t n() const noexcept { return n_; }
    std::size_t kl() const noexcept { return kl_; }
    std::size_t ku() const noexcept { return ku_; }
    int pivot_sign() const noexcept { return pivot_sign_; }

    /// Diagonal entry i of the upper factor.
    const T& u_diagonal(std::size_t i) const noexcept { return lu_[i * ld() + kl_ + ku_]; }

    std::size_t storage_bytes() const noexcept {
        return lu_.capacity() * sizeof(T) + pivots_.capacity() * sizeof(std::size_t);
    }

    /// In-place solve of B x = b.
    void solve_in_place(std::span<T> b) const;

    /// In-place solve of B^T x = b.
    void solve_transpose_in_place(std::span<T> b) const;

    /// In-place solve on a strided vector (element t at b[t * stride]).
    void solve_strided(T* b, std::size_t stride) const;

private:
    friend BasicBandedFactorization band_lu<T>(const BasicBandedMatrix<T>& b);

    std::size_t ld() const noexcept { return 2 * kl_ + ku_ + 1; }

    std::size_t n_ = 0;
    std::size_t kl_ = 0;
    std::size_t ku_ = 0;
    int pivot_sign_ = 1;
    std::vector<T> lu_;
    std::vector<std::size_t> pivots_;
};

template <class T>
struct BasicLogDet {
    T log_abs_det{0};
    int sign = 1;
};

using BandedMatrix = BasicBandedMatrix<double>;
using BandedFactorization = BasicBandedFactorization<double>;
using LogDet = BasicLogDet<double>;

template <class T>
using SpanOf = std::type_identity_t<std::span<const T>>;

template <class T>
std::vector<T> band_matvec(const BasicBandedMatrix<T>& b, SpanOf<T> v);

/// B^T v.
template <class T>
std::vector<T> band_matvec_transpose(const BasicBandedMatrix<T>& b, SpanOf<T> v);

template <class T>
std::vector<T> band_solve(const BasicBandedFactorization<T>& f, SpanOf<T> rhs);

/// Solves for `columns` right-hand sides stored column after column in `rhs`.
template <class T>
std::vector<T> band_solve(const BasicBandedFactorization<T>& f, SpanOf<T> rhs, std::size_t columns);

template <class T>
BasicLogDet<T> band_logdet(const BasicBandedFactorization<T>& f);

/// B1 + alpha * B2, stored with the wider of the two bandwidths on each side.
template <class T>
BasicBandedMatrix<T> band_add_scaled(const BasicBandedMatrix<T>& b1, const BasicBandedMatrix<T>& b2,
                                     std::type_identity_t<T> alpha);

} // namespace kpgp
