#include "kpgp/precision.hpp"

#include <algorithm>
#include <cmath>

namespace kpgp {

namespace {

// Largest amplification each type absorbs while keeping about 1e-10 relative accuracy.
constexpr double kDoubleLimit = 1e7;
constexpr double kLongDoubleLimit = 1e11;

// Band inverse: measured error stays below about 1e3 * eps * amp^2; keep it under 1e-10.
constexpr double kBandInverseBudget = 1e-13;

} // namespace

const char* to_string(Precision precision) {
    switch (precision) {
    case Precision::Auto: return "auto";
    case Precision::Double: return "double";
    case Precision::LongDouble: return "long-double";
    case Precision::Quad: return "quad";
    }
    return "?";
}

std::optional<Precision> parse_precision(std::string_view text) {
    for (Precision p : {Precision::Auto, Precision::Double, Precision::LongDouble, Precision::Quad})
        if (text == to_string(p)) return p;
    return std::nullopt;
}

double kp_amplification(const HalfIntegerMatern& kern, std::span<const double> knots) {
    if (knots.size() < 2) return 1.0;
    const double range = knots.back() - knots.front();
    const double ratio = static_cast<double>(knots.size()) / std::max(1.0, kern.c() * range);
    return std::pow(std::max(ratio, 1.0), 2.0 * kern.p() + 2.0);
}

Precision resolve_precision(Precision requested, const HalfIntegerMatern& kern, std::span<const double> knots) {
    if (requested != Precision::Auto) return requested;
    const double amp = kp_amplification(kern, knots);
    if (amp <= kDoubleLimit) return Precision::Double;
    if (amp <= kLongDoubleLimit) return Precision::LongDouble;
    return Precision::Quad;
}

std::optional<Precision> band_inverse_precision(const HalfIntegerMatern& kern, std::span<const double> knots) {
    const double amp = kp_amplification(kern, knots);
    const double squared = amp * amp;
    if (squared * 0x1p-52 <= kBandInverseBudget) return Precision::Double;
    if (squared * 0x1p-63 <= kBandInverseBudget) return Precision::LongDouble;
    if (squared * 0x1p-112 <= kBandInverseBudget) return Precision::Quad;
    return std::nullopt;
}

} // namespace kpgp
