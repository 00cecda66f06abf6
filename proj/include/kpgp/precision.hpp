#pragma once

#include "kpgp/matern.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace kpgp {

/**
 * Working precision of the banded KP computations. Inputs and outputs are
 * always double; Auto picks the cheapest type whose rounding error, amplified
 * by the estimate below, stays well under the accuracy targets.
 */
enum class Precision { Auto, Double, LongDouble, Quad };

const char* to_string(Precision precision);
std::optional<Precision> parse_precision(std::string_view text);

/**
 * Rough growth factor of rounding errors through A and Phi + eta A:
 * (n / max(1, c * range))^(2p + 2). Densely sampled smooth kernels make the
 * packet coefficients nearly cancel, which is what this measures.
 */
double kp_amplification(const HalfIntegerMatern& kern, std::span<const double> knots);

/// Requested precision, or the Auto choice for this kernel and design.
Precision resolve_precision(Precision requested, const HalfIntegerMatern& kern, std::span<const double> knots);

/**
 * Precision for the banded inverse behind O(1) variance queries. Its error
 * grows like the square of the amplification, so it may need a wider type
 * than the fit. Empty when even quad is not enough; callers then fall back
 * to one banded solve per query point.
 */
std::optional<Precision> band_inverse_precision(const HalfIntegerMatern& kern, std::span<const double> knots);

} // namespace kpgp
