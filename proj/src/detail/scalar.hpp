#pragma once

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>

#include <cmath>
#include <limits>

namespace kpgp::detail {

using quad = boost::multiprecision::float128;

template <class T>
inline double to_double(const T& v) {
    return static_cast<double>(v);
}

template <class T>
inline T epsilon() {
    return std::numeric_limits<T>::epsilon();
}

template <class T>
inline bool is_finite(const T& v) {
    using std::isfinite;
    using boost::multiprecision::isfinite;
    return isfinite(v);
}

// Expands to one explicit instantiation per supported scalar type.
#define KPGP_FOR_EACH_SCALAR(MACRO) \
    MACRO(double)                   \
    MACRO(long double)              \
    MACRO(::kpgp::detail::quad)

} // namespace kpgp::detail
