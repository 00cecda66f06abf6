#pragma once

#include "kpgp/banded.hpp"
#include "kpgp/kp_basis.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

namespace kpgp::detail {

/**
 * Band of C^{-1} for the symmetric banded C = A^T M, by a banded LDL^T and
 * the Takahashi recurrence. Since phi(x)^T = K(x, X) A, the posterior
 * quadratic form phi^T M^{-1} K(X, x) equals phi^T C^{-1} phi, and only
 * entries of C^{-1} inside the band are ever touched.
 */
template <class T>
class BandInverse {
public:
    /// Band kept at least `min_width` wide. Empty when LDL^T meets a nonpositive pivot.
    static std::optional<BandInverse> build(const BasicBandedMatrix<T>& a, const BasicBandedMatrix<T>& m,
                                            std::size_t min_width) {
        BandInverse out;
        const std::size_t n = a.n();
        const std::size_t b = std::min(n - 1, std::max({a.ku() + m.kl(), a.kl() + m.ku(), min_width}));
        out.n_ = n;
        out.b_ = b;

        // C(i, j) = sum_k A(k, i) M(k, j), symmetrized; lower band stored by rows
        std::vector<T> c(n * (b + 1), T(0));
        auto cidx = [&](std::size_t i, std::size_t j) { return i * (b + 1) + (i - j); };
        auto product = [&](std::size_t i, std::size_t j) {
            const std::size_t lo = std::max({i >= a.ku() ? i - a.ku() : 0, j >= m.ku() ? j - m.ku() : 0});
            const std::size_t hi = std::min({n - 1, i + a.kl(), j + m.kl()});
            T s = 0;
            for (std::size_t k = lo; k <= hi; ++k) s += a(k, i) * m(k, j);
            return s;
        };
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i >= b ? i - b : 0; j <= i; ++j)
                c[cidx(i, j)] = T(0.5) * (product(i, j) + product(j, i));

        // LDL^T in place: c holds L below the diagonal and D on it
        std::vector<T> ld(b + 1);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k0 = j >= b ? j - b : 0;
            T d = c[cidx(j, j)];
            for (std::size_t k = k0; k < j; ++k) {
                ld[j - k] = c[cidx(j, k)] * c[cidx(k, k)];
                d -= c[cidx(j, k)] * ld[j - k];
            }
            if (!(d > T(0))) return std::nullopt;
            c[cidx(j, j)] = d;
            for (std::size_t i = j + 1; i <= std::min(n - 1, j + b); ++i) {
                T s = c[cidx(i, j)];
                for (std::size_t k = std::max(k0, i >= b ? i - b : 0); k < j; ++k) s -= c[cidx(i, k)] * ld[j - k];
                c[cidx(i, j)] = s / d;
            }
        }

        // Z = C^{-1} on the band, from the last row up
        out.z_.assign(n * (b + 1), T(0));
        for (std::size_t i = n; i-- > 0;) {
            const std::size_t last = std::min(n - 1, i + b);
            for (std::size_t j = last; j > i; --j) {
                T s = 0;
                for (std::size_t k = i + 1; k <= last; ++k) s -= c[cidx(k, i)] * out.at(k, j);
                out.z_[i * (b + 1) + (j - i)] = s;
            }
            T s = T(1) / c[cidx(i, i)];
            for (std::size_t k = i + 1; k <= last; ++k) s -= c[cidx(k, i)] * out.at(i, k);
            out.z_[i * (b + 1)] = s;
        }
        return out;
    }

    /// v^T C^{-1} v for v supported on `values.size()` entries starting at `start`.
    T quadratic(std::size_t start, const std::vector<T>& values) const {
        T sum = 0;
        for (std::size_t u = 0; u < values.size(); ++u) {
            if (values[u] == T(0)) continue;
            T row = values[u] * at(start + u, start + u);
            for (std::size_t w = u + 1; w < values.size(); ++w) row += T(2) * values[w] * at(start + u, start + w);
            sum += values[u] * row;
        }
        return sum;
    }

    T quadratic(const BasicBasisRow<T>& row) const { return quadratic(row.window_start, row.values); }

    std::size_t bandwidth() const noexcept { return b_; }
    std::size_t storage_bytes() const noexcept { return z_.capacity() * sizeof(T); }

private:
    T at(std::size_t i, std::size_t j) const {
        if (j < i) std::swap(i, j);
        return z_[i * (b_ + 1) + (j - i)];
    }

    std::size_t n_ = 0;
    std::size_t b_ = 0;
    std::vector<T> z_;
};

} // namespace kpgp::detail
