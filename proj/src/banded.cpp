#include "kpgp/banded.hpp"

#include "detail/scalar.hpp"
#include "kpgp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kpgp {

template <class T>
BasicBandedMatrix<T>::BasicBandedMatrix(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(n == 0 ? 0 : std::min(kl, n - 1)), ku_(n == 0 ? 0 : std::min(ku, n - 1)),
      bands_((kl_ + ku_ + 1) * n, T(0)) {}

template <class T>
BasicBandedMatrix<T> BasicBandedMatrix<T>::identity(std::size_t n) {
    BasicBandedMatrix eye(n, 0, 0);
    std::fill(eye.bands_.begin(), eye.bands_.end(), T(1));
    return eye;
}

template <class T>
T& BasicBandedMatrix<T>::at(std::size_t i, std::size_t j) {
    if (!in_band(i, j))
        fail(ErrorKind::Parameter, "entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                       ") lies outside the band");
    return bands_[j * ld() + ku_ + i - j];
}

template <class T>
std::size_t BasicBandedMatrix<T>::effective_kl() const {
    std::size_t width = 0;
    for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t i = j + 1; i <= std::min(n_ - 1, j + kl_); ++i)
            if ((*this)(i, j) != T(0)) width = std::max(width, i - j);
    return width;
}

template <class T>
std::size_t BasicBandedMatrix<T>::effective_ku() const {
    std::size_t width = 0;
    for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t i = j > ku_ ? j - ku_ : 0; i < j; ++i)
            if ((*this)(i, j) != T(0)) width = std::max(width, j - i);
    return width;
}

template <class T>
std::vector<T> band_matvec(const BasicBandedMatrix<T>& b, SpanOf<T> v) {
    if (v.size() != b.n())
        fail(ErrorKind::Parameter, "band_matvec: vector length " + std::to_string(v.size()) +
                                       " does not match order " + std::to_string(b.n()));
    const std::size_t n = b.n(), kl = b.kl(), ku = b.ku(), ld = b.ld();
    const auto bands = b.bands();
    std::vector<T> out(n, T(0));
    for (std::size_t j = 0; j < n; ++j) {
        const T vj = v[j];
        if (vj == T(0)) continue;
        const std::size_t lo = j > ku ? j - ku : 0;
        const std::size_t hi = std::min(n - 1, j + kl);
        const T* col = bands.data() + j * ld + ku - j;
        for (std::size_t i = lo; i <= hi; ++i) out[i] += col[i] * vj;
    }
    return out;
}

template <class T>
std::vector<T> band_matvec_transpose(const BasicBandedMatrix<T>& b, SpanOf<T> v) {
    if (v.size() != b.n()) fail(ErrorKind::Parameter, "band_matvec_transpose: vector length mismatch");
    const std::size_t n = b.n(), kl = b.kl(), ku = b.ku(), ld = b.ld();
    const auto bands = b.bands();
    std::vector<T> out(n, T(0));
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t lo = j > ku ? j - ku : 0;
        const std::size_t hi = std::min(n - 1, j + kl);
        const T* col = bands.data() + j * ld + ku - j;
        T sum = 0;
        for (std::size_t i = lo; i <= hi; ++i) sum += col[i] * v[i];
        out[j] = sum;
    }
    return out;
}

template <class T>
BasicBandedFactorization<T> band_lu(const BasicBandedMatrix<T>& b) {
    using std::abs;
    BasicBandedFactorization<T> f;
    const std::size_t n = b.n(), kl = b.kl(), ku = b.ku();
    f.n_ = n;
    f.kl_ = kl;
    f.ku_ = ku;
    const std::size_t ld = f.ld();
    const std::size_t kv = kl + ku;
    f.lu_.assign(ld * n, T(0));
    f.pivots_.resize(n);

    // Copy into the lower part of each storage column, leaving kl rows of fill-in on top.
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t lo = j > ku ? j - ku : 0;
        const std::size_t hi = std::min(n - 1, j + kl);
        for (std::size_t i = lo; i <= hi; ++i) f.lu_[j * ld + kv + i - j] = b(i, j);
    }

    auto ab = [&](std::size_t row, std::size_t col) -> T& { return f.lu_[col * ld + row]; };

    std::size_t ju = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t km = std::min(kl, n - 1 - j);
        std::size_t jp = 0;
        T best = abs(ab(kv, j));
        for (std::size_t t = 1; t <= km; ++t) {
            const T cand = abs(ab(kv + t, j));
            if (cand > best) {
                best = cand;
                jp = t;
            }
        }
        f.pivots_[j] = j + jp;
        if (best == T(0)) fail(ErrorKind::SingularMatrix, "band_lu: zero pivot column " + std::to_string(j));

        ju = std::max(ju, std::min(j + ku + jp, n - 1));
        if (jp != 0) {
            f.pivot_sign_ = -f.pivot_sign_;
            for (std::size_t col = j; col <= ju; ++col) std::swap(ab(kv + jp - (col - j), col), ab(kv - (col - j), col));
        }
        if (km > 0) {
            const T inv = T(1) / ab(kv, j);
            for (std::size_t t = 1; t <= km; ++t) ab(kv + t, j) *= inv;
            for (std::size_t col = j + 1; col <= ju; ++col) {
                const T pivot_row = ab(kv - (col - j), col);
                if (pivot_row == T(0)) continue;
                for (std::size_t t = 1; t <= km; ++t) ab(kv + t - (col - j), col) -= ab(kv + t, j) * pivot_row;
            }
        }
    }
    return f;
}

template <class T>
void BasicBandedFactorization<T>::solve_strided(T* b, std::size_t stride) const {
    const std::size_t ldv = ld();
    const std::size_t kv = kl_ + ku_;
    auto x = [&](std::size_t i) -> T& { return b[i * stride]; };
    const T* lu = lu_.data();

    if (kl_ > 0) {
        for (std::size_t j = 0; j + 1 < n_; ++j) {
            const std::size_t lm = std::min(kl_, n_ - 1 - j);
            const std::size_t l = pivots_[j];
            if (l != j) std::swap(x(l), x(j));
            const T xj = x(j);
            if (xj == T(0)) continue;
            const T* mult = lu + j * ldv + kv;
            for (std::size_t t = 1; t <= lm; ++t) x(j + t) -= mult[t] * xj;
        }
    }
    for (std::size_t jj = n_; jj-- > 0;) {
        const T* col = lu + jj * ldv;
        const T xj = x(jj) / col[kv];
        x(jj) = xj;
        if (xj == T(0)) continue;
        const std::size_t lo = jj > kv ? jj - kv : 0;
        for (std::size_t i = lo; i < jj; ++i) x(i) -= col[kv + i - jj] * xj;
    }
}

template <class T>
void BasicBandedFactorization<T>::solve_in_place(std::span<T> b) const {
    if (b.size() != n_) fail(ErrorKind::Parameter, "band_solve: right-hand side length mismatch");
    solve_strided(b.data(), 1);
}

template <class T>
void BasicBandedFactorization<T>::solve_transpose_in_place(std::span<T> b) const {
    if (b.size() != n_) fail(ErrorKind::Parameter, "band_solve: right-hand side length mismatch");
    const std::size_t ldv = ld();
    const std::size_t kv = kl_ + ku_;
    const T* lu = lu_.data();
    // U^T y = b
    for (std::size_t j = 0; j < n_; ++j) {
        const T* col = lu + j * ldv;
        const std::size_t lo = j > kv ? j - kv : 0;
        T sum = b[j];
        for (std::size_t i = lo; i < j; ++i) sum -= col[kv + i - j] * b[i];
        b[j] = sum / col[kv];
    }
    // L^T x = y, undoing the row interchanges in reverse
    if (kl_ > 0) {
        for (std::size_t jj = n_ - 1; jj-- > 0;) {
            const std::size_t lm = std::min(kl_, n_ - 1 - jj);
            const T* mult = lu + jj * ldv + kv;
            T sum = b[jj];
            for (std::size_t t = 1; t <= lm; ++t) sum -= mult[t] * b[jj + t];
            b[jj] = sum;
            const std::size_t l = pivots_[jj];
            if (l != jj) std::swap(b[l], b[jj]);
        }
    }
}

template <class T>
std::vector<T> band_solve(const BasicBandedFactorization<T>& f, SpanOf<T> rhs) {
    std::vector<T> x(rhs.begin(), rhs.end());
    f.solve_in_place(x);
    return x;
}

template <class T>
std::vector<T> band_solve(const BasicBandedFactorization<T>& f, SpanOf<T> rhs, std::size_t columns) {
    if (rhs.size() != f.n() * columns) fail(ErrorKind::Parameter, "band_solve: right-hand side shape mismatch");
    std::vector<T> x(rhs.begin(), rhs.end());
    for (std::size_t c = 0; c < columns; ++c) f.solve_in_place(std::span<T>(x).subspan(c * f.n(), f.n()));
    return x;
}

template <class T>
BasicLogDet<T> band_logdet(const BasicBandedFactorization<T>& f) {
    using std::abs;
    using std::log;
    BasicLogDet<T> out;
    out.sign = f.pivot_sign();
    for (std::size_t i = 0; i < f.n(); ++i) {
        const T& d = f.u_diagonal(i);
        if (d == T(0)) fail(ErrorKind::SingularMatrix, "band_logdet: zero diagonal in upper factor");
        if (d < T(0)) out.sign = -out.sign;
        out.log_abs_det += log(abs(d));
    }
    return out;
}

template <class T>
BasicBandedMatrix<T> band_add_scaled(const BasicBandedMatrix<T>& b1, const BasicBandedMatrix<T>& b2,
                                     std::type_identity_t<T> alpha) {
    if (b1.n() != b2.n())
        fail(ErrorKind::Parameter, "band_add_scaled: orders " + std::to_string(b1.n()) + " and " +
                                       std::to_string(b2.n()) + " differ");
    BasicBandedMatrix<T> sum(b1.n(), std::max(b1.kl(), b2.kl()), std::max(b1.ku(), b2.ku()));
    const std::size_t n = b1.n();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t lo = j > sum.ku() ? j - sum.ku() : 0;
        const std::size_t hi = std::min(n - 1, j + sum.kl());
        for (std::size_t i = lo; i <= hi; ++i) sum.at(i, j) = b1(i, j) + alpha * b2(i, j);
    }
    return sum;
}

#define KPGP_INSTANTIATE(T)                                                                                  \
    template class BasicBandedMatrix<T>;                                                                     \
    template class BasicBandedFactorization<T>;                                                              \
    template std::vector<T> band_matvec<T>(const BasicBandedMatrix<T>&, SpanOf<T>);                          \
    template std::vector<T> band_matvec_transpose<T>(const BasicBandedMatrix<T>&, SpanOf<T>);                \
    template BasicBandedFactorization<T> band_lu<T>(const BasicBandedMatrix<T>&);                            \
    template std::vector<T> band_solve<T>(const BasicBandedFactorization<T>&, SpanOf<T>);                    \
    template std::vector<T> band_solve<T>(const BasicBandedFactorization<T>&, SpanOf<T>, std::size_t);       \
    template BasicLogDet<T> band_logdet<T>(const BasicBandedFactorization<T>&);                              \
    template BasicBandedMatrix<T> band_add_scaled<T>(const BasicBandedMatrix<T>&, const BasicBandedMatrix<T>&, \
                                                     std::type_identity_t<T>);
KPGP_FOR_EACH_SCALAR(KPGP_INSTANTIATE)
#undef KPGP_INSTANTIATE

} // namespace kpgp
