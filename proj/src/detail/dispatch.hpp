#pragma once

#include "detail/scalar.hpp"
#include "kpgp/precision.hpp"

namespace kpgp::detail {

// Runs `body.template operator()<T>()` with T matching a resolved precision.
template <class F>
decltype(auto) dispatch(Precision precision, F&& body) {
    switch (precision) {
    case Precision::LongDouble: return body.template operator()<long double>();
    case Precision::Quad: return body.template operator()<quad>();
    default: return body.template operator()<double>();
    }
}

/// The more accurate of two resolved precisions.
inline Precision wider(Precision a, Precision b) {
    auto rank = [](Precision p) { return p == Precision::Quad ? 2 : p == Precision::LongDouble ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

} // namespace kpgp::detail
