// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "rockhunt/tensor.hpp"

namespace rockhunt {

/// A positive real multiplier M stored as M = multiplier * 2^(exponent - 31)
/// with multiplier normalized into [2^30, 2^31). The zero multiplier is
/// {0, 0}. Exponents are capped at 31 so applying a multiplier only ever
/// shifts right.
struct QuantizedMultiplier {
    std::int32_t multiplier = 0;
    int exponent = 0;

    bool operator==(const QuantizedMultiplier&) const = default;
};

/// Splits `real` into a normalized 31-bit mantissa and a power of two.
///
/// Reals below 2^-32 become the zero multiplier: for any int32 input the
/// exact product is below one half and would round to 0 anyway. Reals of
/// 2^31 and above saturate to the largest representable multiplier.
inline QuantizedMultiplier quantize_multiplier(double real) {
    if (!std::isfinite(real) || real < 0.0) throw InvalidRangeError("multiplier must be finite and >= 0");
    if (real == 0.0) return {};
    int exponent = 0;
    const double fraction = std::frexp(real, &exponent); // real = fraction * 2^exponent, fraction in [0.5, 1)
    auto mantissa = std::llround(fraction * 2147483648.0);
    if (mantissa == (1LL << 31)) {
        mantissa = 1LL << 30;
        ++exponent;
    }
    if (exponent < -31) return {};
    if (exponent > 31) return {std::numeric_limits<std::int32_t>::max(), 31};
    return {static_cast<std::int32_t>(mantissa), exponent};
}

inline double multiplier_value(const QuantizedMultiplier& qm) noexcept {
    return std::ldexp(static_cast<double>(qm.multiplier), qm.exponent - 31);
}

namespace detail {

__extension__ typedef __int128 wide;

/// x / 2^shift rounded half away from zero (shift >= 0).
inline wide rounding_shift_right(wide x, int shift) noexcept {
    if (shift == 0) return x;
    const wide half = wide{1} << (shift - 1);
    return x >= 0 ? (x + half) >> shift : -((-x + half) >> shift);
}

/// Same as rounding_shift_right for |x| < 2^62 and 0 <= shift <= 62.
/// Rounding half away from zero is floor((x + half - [x < 0]) / 2^shift).
inline std::int64_t rounding_shift_right64(std::int64_t x, int shift) noexcept {
    if (shift == 0) return x;
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    return (x + half - (x < 0)) >> shift;
}

inline std::int64_t saturate_int64(wide v) noexcept {
    constexpr wide lo = std::numeric_limits<std::int64_t>::min();
    constexpr wide hi = std::numeric_limits<std::int64_t>::max();
    return static_cast<std::int64_t>(v < lo ? lo : (v > hi ? hi : v));
}

} // namespace detail

/// round_half_away(x * M) computed with integer arithmetic only.
inline std::int64_t multiply_by_quantized_multiplier(std::int64_t x, const QuantizedMultiplier& qm) noexcept {
    if (qm.multiplier == 0) return 0;
    const int shift = 31 - qm.exponent;
    if (x >= std::numeric_limits<std::int32_t>::min() && x <= std::numeric_limits<std::int32_t>::max()) {
        // |x * m| < 2^62: exact in int64, and any shift >= 63 rounds it to 0.
        if (shift >= 63) return 0;
        return detail::rounding_shift_right64(x * qm.multiplier, shift);
    }
    const detail::wide product = detail::wide{x} * qm.multiplier;
    return detail::saturate_int64(detail::rounding_shift_right(product, shift));
}

/// round_half_away(xa * Ma + xb * Mb) with a single rounding step; the
/// integer recipe behind int8 add.
inline std::int64_t multiply_add_quantized(std::int64_t xa, const QuantizedMultiplier& ma, std::int64_t xb,
                                           const QuantizedMultiplier& mb) noexcept {
    if (ma.multiplier == 0) return multiply_by_quantized_multiplier(xb, mb);
    if (mb.multiplier == 0) return multiply_by_quantized_multiplier(xa, ma);
    const int base = std::min(ma.exponent, mb.exponent);
    const int da = ma.exponent - base, db = mb.exponent - base;
    if (std::max(da, db) <= 15 && 31 - base <= 62 && xa >= -(1 << 15) && xa <= (1 << 15) && xb >= -(1 << 15) &&
        xb <= (1 << 15)) {
        // Each term is below 2^61, so the sum and its rounding fit in int64.
        return detail::rounding_shift_right64(((xa * ma.multiplier) << da) + ((xb * mb.multiplier) << db), 31 - base);
    }
    const detail::wide na = (detail::wide{xa} * ma.multiplier) << (ma.exponent - base);
    const detail::wide nb = (detail::wide{xb} * mb.multiplier) << (mb.exponent - base);
    return detail::saturate_int64(detail::rounding_shift_right(na + nb, 31 - base));
}

/// Maps an int32 accumulator into the int8 output domain:
/// clamp(round_half_away(acc * M) + zero_point, -128, 127).
inline std::int8_t requantize(std::int32_t acc, const QuantizedMultiplier& qm, std::int32_t out_zero_point) noexcept {
    return static_cast<std::int8_t>(saturate_int8(multiply_by_quantized_multiplier(acc, qm) + out_zero_point));
}

/// Convenience form deriving M = in_scale * w_scale / out_scale. Not for
/// inner loops: it builds the multiplier on every call.
inline std::int8_t requantize(std::int32_t acc, double in_scale, double w_scale, const QuantParams& out_qp) {
    if (!(in_scale > 0.0) || !(w_scale > 0.0)) throw InvalidRangeError("requantize scales must be positive");
    validate_qparams(out_qp, DType::int8);
    return requantize(acc, quantize_multiplier(in_scale * w_scale / out_qp.scale), out_qp.zero_point);
}

} // namespace rockhunt
