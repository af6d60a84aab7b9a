// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Straight-line reference implementations the library is checked against.
// They share no code with include/rockhunt beyond the plain data types:
// every loop, padding rule and rounding step is written out again here.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "rockhunt/arena.hpp"
#include "rockhunt/detection.hpp"
#include "rockhunt/fixed_point.hpp"

namespace rockhunt::oracle {

// ------------------------------------------------------------ geometry

struct Conv {
    int H = 1, W = 1, C = 1; // input
    int OC = 1;              // conv output channels
    int KH = 1, KW = 1, SH = 1, SW = 1;
    bool same = true;

    int out_extent(int in, int k, int s) const { return same ? (in + s - 1) / s : (in < k ? 0 : (in - k) / s + 1); }
    int OH() const { return out_extent(H, KH, SH); }
    int OW() const { return out_extent(W, KW, SW); }
    int pad(int in, int k, int s) const {
        if (!same) return 0;
        const int total = (out_extent(in, k, s) - 1) * s + k - in;
        return total > 0 ? total / 2 : 0;
    }
    int PT() const { return pad(H, KH, SH); }
    int PL() const { return pad(W, KW, SW); }

    /// Input row/col of tap (k) at output position (o), or -1 when it falls in padding.
    int iy(int oy, int ky) const {
        const int y = oy * SH - PT() + ky;
        return y >= 0 && y < H ? y : -1;
    }
    int ix(int ox, int kx) const {
        const int x = ox * SW - PL() + kx;
        return x >= 0 && x < W ? x : -1;
    }

    Padding padding() const { return same ? Padding::same : Padding::valid; }
};

inline double relu6(double v) { return v < 0 ? 0 : (v > 6 ? 6 : v); }

// ---------------------------------------------------------- float kernels

inline std::vector<double> conv2d(const Conv& c, const std::vector<float>& x, const std::vector<float>& w,
                                  const std::vector<float>& b, bool act) {
    std::vector<double> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int oc = 0; oc < c.OC; ++oc) {
                double acc = b[oc];
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y < 0 || xx < 0) continue;
                        for (int ic = 0; ic < c.C; ++ic)
                            acc += double(x[(y * c.W + xx) * c.C + ic]) * w[((oc * c.KH + ky) * c.KW + kx) * c.C + ic];
                    }
                out.push_back(act ? relu6(acc) : acc);
            }
    return out;
}

inline std::vector<double> depthwise(const Conv& c, const std::vector<float>& x, const std::vector<float>& w,
                                     const std::vector<float>& b, bool act) {
    std::vector<double> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int ch = 0; ch < c.C; ++ch) {
                double acc = b[ch];
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y >= 0 && xx >= 0) acc += double(x[(y * c.W + xx) * c.C + ch]) * w[(ky * c.KW + kx) * c.C + ch];
                    }
                out.push_back(act ? relu6(acc) : acc);
            }
    return out;
}

inline std::vector<double> fully_connected(const std::vector<float>& x, const std::vector<float>& w,
                                           const std::vector<float>& b, bool act) {
    std::vector<double> out;
    for (std::size_t o = 0; o < b.size(); ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < x.size(); ++i) acc += double(x[i]) * w[o * x.size() + i];
        out.push_back(act ? relu6(acc) : acc);
    }
    return out;
}

/// Pools over in-bounds taps only; average divides by their count.
inline std::vector<double> pool(const Conv& c, const std::vector<float>& x, bool average) {
    std::vector<double> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int ch = 0; ch < c.C; ++ch) {
                double s = 0, m = -std::numeric_limits<double>::infinity();
                int n = 0;
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y < 0 || xx < 0) continue;
                        const double v = x[(y * c.W + xx) * c.C + ch];
                        s += v;
                        m = std::max(m, v);
                        ++n;
                    }
                out.push_back(average ? s / n : m);
            }
    return out;
}

inline std::vector<double> softmax(const std::vector<float>& x, std::size_t depth) {
    std::vector<double> out;
    for (std::size_t r = 0; r < x.size(); r += depth) {
        double sum = 0;
        for (std::size_t i = 0; i < depth; ++i) sum += std::exp(double(x[r + i]));
        for (std::size_t i = 0; i < depth; ++i) out.push_back(std::exp(double(x[r + i])) / sum);
    }
    return out;
}

// --------------------------------------------------------- integer recipe

__extension__ typedef __int128 i128;

/// x * m * 2^(e - 31) rounded half away from zero, by exact integer division.
inline std::int64_t scale(std::int64_t x, const QuantizedMultiplier& qm) {
    if (qm.multiplier == 0) return 0;
    const i128 p = i128{x} * qm.multiplier;
    const int shift = 31 - qm.exponent;
    if (shift == 0) return static_cast<std::int64_t>(p);
    const i128 d = i128{1} << shift;
    const i128 mag = p < 0 ? -p : p;
    i128 q = mag / d;
    if (2 * (mag % d) >= d) ++q;
    return static_cast<std::int64_t>(p < 0 ? -q : q);
}

inline std::int32_t clamp8(std::int64_t v, std::int32_t lo = -128, std::int32_t hi = 127) {
    return static_cast<std::int32_t>(v < lo ? lo : (v > hi ? hi : v));
}

inline std::int32_t sat32(std::int64_t v) {
    constexpr std::int64_t lo = std::numeric_limits<std::int32_t>::min(), hi = std::numeric_limits<std::int32_t>::max();
    return static_cast<std::int32_t>(v < lo ? lo : (v > hi ? hi : v));
}

struct QParams8 {
    std::int32_t zx = 0, zw = 0, zo = 0;
    QuantizedMultiplier m;
    std::int32_t lo = -128, hi = 127;
};

/// The int8 requantization recipe: exact int32-saturated accumulator plus
/// bias, scaled by M, offset and clamped.
inline std::int8_t finish(std::int64_t acc, std::int32_t bias, const QParams8& p) {
    return static_cast<std::int8_t>(clamp8(scale(sat32(acc + bias), p.m) + p.zo, p.lo, p.hi));
}

inline std::vector<std::int8_t> conv2d_i8(const Conv& c, const std::vector<std::int8_t>& x,
                                          const std::vector<std::int8_t>& w, const std::vector<std::int32_t>& b,
                                          const QParams8& p) {
    std::vector<std::int8_t> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int oc = 0; oc < c.OC; ++oc) {
                std::int64_t acc = 0;
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y < 0 || xx < 0) continue;
                        for (int ic = 0; ic < c.C; ++ic)
                            acc += std::int64_t{x[(y * c.W + xx) * c.C + ic] - p.zx} *
                                   (w[((oc * c.KH + ky) * c.KW + kx) * c.C + ic] - p.zw);
                    }
                out.push_back(finish(acc, b[oc], p));
            }
    return out;
}

inline std::vector<std::int8_t> depthwise_i8(const Conv& c, const std::vector<std::int8_t>& x,
                                             const std::vector<std::int8_t>& w, const std::vector<std::int32_t>& b,
                                             const QParams8& p) {
    std::vector<std::int8_t> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int ch = 0; ch < c.C; ++ch) {
                std::int64_t acc = 0;
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y >= 0 && xx >= 0)
                            acc += std::int64_t{x[(y * c.W + xx) * c.C + ch] - p.zx} * (w[(ky * c.KW + kx) * c.C + ch] - p.zw);
                    }
                out.push_back(finish(acc, b[ch], p));
            }
    return out;
}

inline std::vector<std::int8_t> fully_connected_i8(const std::vector<std::int8_t>& x, const std::vector<std::int8_t>& w,
                                                   const std::vector<std::int32_t>& b, const QParams8& p) {
    std::vector<std::int8_t> out;
    for (std::size_t o = 0; o < b.size(); ++o) {
        std::int64_t acc = 0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += std::int64_t{x[i] - p.zx} * (w[o * x.size() + i] - p.zw);
        out.push_back(finish(acc, b[o], p));
    }
    return out;
}

/// Max in the input domain, then one rescale to the output parameters.
inline std::vector<std::int8_t> max_pool_i8(const Conv& c, const std::vector<std::int8_t>& x, std::int32_t zi,
                                            const QuantizedMultiplier& m, std::int32_t zo) {
    std::vector<std::int8_t> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int ch = 0; ch < c.C; ++ch) {
                int best = -129;
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y >= 0 && xx >= 0) best = std::max<int>(best, x[(y * c.W + xx) * c.C + ch]);
                    }
                out.push_back(static_cast<std::int8_t>(clamp8(scale(best - zi, m) + zo)));
            }
    return out;
}

/// Sum of (q - zi) over in-bounds taps, scaled by in_scale / (out_scale * taps).
inline std::vector<std::int8_t> avg_pool_i8(const Conv& c, const std::vector<std::int8_t>& x, double in_scale,
                                            std::int32_t zi, double out_scale, std::int32_t zo) {
    std::vector<std::int8_t> out;
    for (int oy = 0; oy < c.OH(); ++oy)
        for (int ox = 0; ox < c.OW(); ++ox)
            for (int ch = 0; ch < c.C; ++ch) {
                std::int64_t s = 0;
                int n = 0;
                for (int ky = 0; ky < c.KH; ++ky)
                    for (int kx = 0; kx < c.KW; ++kx) {
                        const int y = c.iy(oy, ky), xx = c.ix(ox, kx);
                        if (y < 0 || xx < 0) continue;
                        s += x[(y * c.W + xx) * c.C + ch] - zi;
                        ++n;
                    }
                out.push_back(static_cast<std::int8_t>(
                    clamp8(scale(s, quantize_multiplier(in_scale / (out_scale * n))) + zo)));
            }
    return out;
}

/// round_half_away(xa * Ma + xb * Mb) over the common denominator 2^62.
inline std::int64_t scale_sum(std::int64_t xa, const QuantizedMultiplier& a, std::int64_t xb,
                              const QuantizedMultiplier& b) {
    const auto numerator = [](std::int64_t x, const QuantizedMultiplier& m) -> i128 {
        if (m.multiplier == 0) return 0;
        return (i128{x} * m.multiplier) * (i128{1} << (m.exponent + 31));
    };
    const i128 p = numerator(xa, a) + numerator(xb, b);
    const i128 d = i128{1} << 62;
    const i128 mag = p < 0 ? -p : p;
    i128 q = mag / d;
    if (2 * (mag % d) >= d) ++q;
    return static_cast<std::int64_t>(p < 0 ? -q : q);
}

inline std::vector<std::int8_t> add_i8(const std::vector<std::int8_t>& a, const std::vector<std::int8_t>& b,
                                       std::int32_t za, const QuantizedMultiplier& ma, std::int32_t zb,
                                       const QuantizedMultiplier& mb, std::int32_t zo, std::int32_t lo = -128,
                                       std::int32_t hi = 127) {
    std::vector<std::int8_t> out;
    for (std::size_t i = 0; i < a.size(); ++i)
        out.push_back(static_cast<std::int8_t>(clamp8(scale_sum(a[i] - za, ma, b[i] - zb, mb) + zo, lo, hi)));
    return out;
}

/// LUT softmax: e[k] = round(2^16 exp(-s k)) for the distance k below the
/// row max, probability round(e * 2^30 / sum e), then requantized by
/// 2^-30 / out_scale.
inline std::vector<std::int8_t> softmax_i8(const std::vector<std::int8_t>& x, std::size_t depth, double in_scale,
                                           double out_scale, std::int32_t zo) {
    std::vector<std::int8_t> out;
    const auto m = quantize_multiplier(std::ldexp(1.0, -30) / out_scale);
    for (std::size_t r = 0; r < x.size(); r += depth) {
        const int mx = *std::max_element(x.begin() + static_cast<long>(r), x.begin() + static_cast<long>(r + depth));
        std::vector<std::uint64_t> e;
        for (std::size_t i = 0; i < depth; ++i) e.push_back(static_cast<std::uint64_t>(std::llround(65536.0 * std::exp(-in_scale * (mx - x[r + i])))));
        const std::uint64_t sum = std::accumulate(e.begin(), e.end(), std::uint64_t{0});
        for (auto v : e) {
            const i128 num = i128{v} << 30;
            i128 prob = num / sum;
            if (2 * (num % sum) >= sum) ++prob;
            out.push_back(static_cast<std::int8_t>(clamp8(scale(static_cast<std::int64_t>(prob), m) + zo)));
        }
    }
    return out;
}

// ---------------------------------------------------------------- boxes

/// IoU by counting cells of a `steps`-per-unit raster.
inline double raster_iou(const BBox& a, const BBox& b, int steps) {
    const double x0 = std::min(a.x_min, b.x_min), x1 = std::max(a.x_max, b.x_max);
    const double y0 = std::min(a.y_min, b.y_min), y1 = std::max(a.y_max, b.y_max);
    const int nx = static_cast<int>(std::ceil((x1 - x0) * steps)), ny = static_cast<int>(std::ceil((y1 - y0) * steps));
    long inter = 0, uni = 0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double x = x0 + (i + 0.5) / steps, y = y0 + (j + 0.5) / steps;
            const bool in_a = x > a.x_min && x < a.x_max && y > a.y_min && y < a.y_max;
            const bool in_b = x > b.x_min && x < b.x_max && y > b.y_min && y < b.y_max;
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    return uni ? double(inter) / double(uni) : 0.0;
}

inline double box_iou(const BBox& a, const BBox& b) {
    const double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double i = w * h;
    const double u = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - i;
    return u > 0 ? i / u : 0.0;
}

/// Textbook NMS without sorting: repeatedly take the best remaining box
/// (confidence desc, then corners and class asc), keep it, and delete every
/// remaining same-class box overlapping it by >= thresh.
inline std::vector<BBox> nms(std::vector<BBox> boxes, double thresh) {
    const auto better = [](const BBox& a, const BBox& b) {
        return std::tie(a.confidence, b.x_min, b.y_min, b.x_max, b.y_max, b.class_id) >
               std::tie(b.confidence, a.x_min, a.y_min, a.x_max, a.y_max, a.class_id);
    };
    std::vector<BBox> kept;
    while (!boxes.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < boxes.size(); ++i)
            if (better(boxes[i], boxes[best])) best = i;
        const BBox k = boxes[best];
        kept.push_back(k);
        std::vector<BBox> rest;
        for (std::size_t i = 0; i < boxes.size(); ++i)
            if (i != best && !(boxes[i].class_id == k.class_id && box_iou(boxes[i], k) >= thresh)) rest.push_back(boxes[i]);
        boxes = std::move(rest);
    }
    return kept;
}

// ---------------------------------------------------------------- arena

/// Lowest feasible aligned offsets for intervals placed in `order`.
inline std::size_t first_fit_peak(const std::vector<LivenessInterval>& iv, const std::vector<std::size_t>& order,
                                  std::size_t alignment) {
    std::vector<std::size_t> off(iv.size(), 0);
    std::vector<bool> placed(iv.size(), false);
    std::size_t peak = 0;
    for (auto i : order) {
        std::vector<std::size_t> candidates{0};
        for (std::size_t j = 0; j < iv.size(); ++j)
            if (placed[j]) candidates.push_back((off[j] + iv[j].bytes + alignment - 1) / alignment * alignment);
        std::sort(candidates.begin(), candidates.end());
        for (auto c : candidates) {
            bool ok = true;
            for (std::size_t j = 0; j < iv.size() && ok; ++j) {
                if (!placed[j]) continue;
                const bool time = iv[i].first <= iv[j].last && iv[j].first <= iv[i].last;
                const bool space = c < off[j] + iv[j].bytes && off[j] < c + iv[i].bytes;
                ok = !(time && space);
            }
            if (ok) {
                off[i] = c;
                break;
            }
        }
        placed[i] = true;
        peak = std::max(peak, off[i] + iv[i].bytes);
    }
    return peak;
}

/// Optimal arena peak: every optimal layout is reproduced by lowest-fit in
/// the order of its offsets, so the minimum over all orders is exact.
inline std::size_t optimal_peak(const std::vector<LivenessInterval>& iv, std::size_t alignment) {
    std::vector<std::size_t> order(iv.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    do best = std::min(best, first_fit_peak(iv, order, alignment));
    while (std::next_permutation(order.begin(), order.end()));
    return best;
}

} // namespace rockhunt::oracle
