#pragma once

#include <cstddef>
#include <optional>

namespace kpgp::detail {

// Precision-specific part of a fitted one-dimensional model.
class Gp1dState {
public:
    virtual ~Gp1dState() = default;
    /// phi(x)^T s; `hint` is read and updated with the located interval.
    virtual double correction(double x, std::optional<std::ptrdiff_t>& hint) const = 0;
    /// phi(x)^T M^{-1} K(X, x).
    virtual double explained(double x) const = 0;
    virtual std::size_t storage_bytes() const = 0;
};

} // namespace kpgp::detail
