// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Reference CNN kernels over NHWC buffers (batch 1).
//
// Float kernels accumulate in double and narrow once to float. The int8
// kernels are integer-only: zero points are subtracted before multiplying,
// products accumulate exactly (int32, or int64 when the reduction is long
// enough to overflow int32), the sum saturates to int32 together with the
// bias and is mapped back to int8 through a QuantizedMultiplier.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rockhunt/fixed_point.hpp"
#include "rockhunt/graph.hpp"

namespace rockhunt::kernels {

struct ConvGeometry {
    std::int32_t in_h = 0, in_w = 0, in_c = 0;
    std::int32_t out_h = 0, out_w = 0, out_c = 0;
    std::int32_t kernel_h = 1, kernel_w = 1;
    std::int32_t stride_h = 1, stride_w = 1;
    std::int32_t pad_top = 0, pad_left = 0;
};

/// Geometry of a conv/pool layer whose input is (1, in_h, in_w, in_c).
inline ConvGeometry make_geometry(std::int32_t in_h, std::int32_t in_w, std::int32_t in_c, std::int32_t out_c,
                                  std::int32_t kernel_h, std::int32_t kernel_w, std::int32_t stride_h,
                                  std::int32_t stride_w, Padding pad) {
    ConvGeometry g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.in_c = in_c;
    g.out_c = out_c;
    g.kernel_h = kernel_h;
    g.kernel_w = kernel_w;
    g.stride_h = stride_h;
    g.stride_w = stride_w;
    g.out_h = conv_output_extent(in_h, kernel_h, stride_h, pad);
    g.out_w = conv_output_extent(in_w, kernel_w, stride_w, pad);
    g.pad_top = conv_pad_before(in_h, kernel_h, stride_h, pad);
    g.pad_left = conv_pad_before(in_w, kernel_w, stride_w, pad);
    return g;
}

/// Window of input rows/cols touched by output position (oy, ox), clipped
/// to the unpadded input.
struct Window {
    std::int32_t y0, y1, x0, x1; // input coordinates, half-open
    std::int32_t ky0, kx0;       // kernel offset of (y0, x0)
};

inline Window window_at(const ConvGeometry& g, std::int32_t oy, std::int32_t ox) noexcept {
    const std::int32_t iy = oy * g.stride_h - g.pad_top;
    const std::int32_t ix = ox * g.stride_w - g.pad_left;
    Window w;
    w.y0 = std::max(iy, 0);
    w.y1 = std::min(iy + g.kernel_h, g.in_h);
    w.x0 = std::max(ix, 0);
    w.x1 = std::min(ix + g.kernel_w, g.in_w);
    w.ky0 = w.y0 - iy;
    w.kx0 = w.x0 - ix;
    return w;
}

inline float apply_activation(double v, Activation act) noexcept {
    if (act == Activation::relu6) v = std::clamp(v, 0.0, 6.0);
    return static_cast<float>(v);
}

// ---------------------------------------------------------------- float32

/// weights: (out_c, kh, kw, in_c)
inline void conv2d(std::span<const float> in, std::span<const float> weights, std::span<const float> bias,
                   std::span<float> out, const ConvGeometry& g, Activation act) {
    const std::size_t row = static_cast<std::size_t>(g.kernel_w) * g.in_c;
    for (std::int32_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            float* dst = &out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.out_c];
            for (std::int32_t oc = 0; oc < g.out_c; ++oc) {
                double acc = bias[oc];
                const float* wk = &weights[static_cast<std::size_t>(oc) * g.kernel_h * row];
                for (std::int32_t y = w.y0; y < w.y1; ++y) {
                    const std::int32_t ky = w.ky0 + (y - w.y0);
                    // One kernel row is contiguous in both input and weights.
                    const float* src = &in[(static_cast<std::size_t>(y) * g.in_w + w.x0) * g.in_c];
                    const float* wp = wk + ky * row + static_cast<std::size_t>(w.kx0) * g.in_c;
                    const std::size_t span = static_cast<std::size_t>(w.x1 - w.x0) * g.in_c;
                    for (std::size_t i = 0; i < span; ++i) acc += double(src[i]) * double(wp[i]);
                }
                dst[oc] = apply_activation(acc, act);
            }
        }
    }
}

/// weights: (1, kh, kw, channels), depth multiplier 1.
inline void depthwise_conv2d(std::span<const float> in, std::span<const float> weights, std::span<const float> bias,
                             std::span<float> out, const ConvGeometry& g, Activation act) {
    const std::int32_t C = g.in_c;
    std::vector<double> acc(static_cast<std::size_t>(C));
    for (std::int32_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            for (std::int32_t c = 0; c < C; ++c) acc[c] = bias[c];
            for (std::int32_t y = w.y0; y < w.y1; ++y) {
                const std::int32_t ky = w.ky0 + (y - w.y0);
                for (std::int32_t x = w.x0; x < w.x1; ++x) {
                    const std::int32_t kx = w.kx0 + (x - w.x0);
                    const float* src = &in[(static_cast<std::size_t>(y) * g.in_w + x) * C];
                    const float* wp = &weights[(static_cast<std::size_t>(ky) * g.kernel_w + kx) * C];
                    for (std::int32_t c = 0; c < C; ++c) acc[c] += double(src[c]) * double(wp[c]);
                }
            }
            float* dst = &out[(static_cast<std::size_t>(oy) * g.out_w + ox) * C];
            for (std::int32_t c = 0; c < C; ++c) dst[c] = apply_activation(acc[c], act);
        }
    }
}

/// weights: (out_features, in_features)
inline void fully_connected(std::span<const float> in, std::span<const float> weights, std::span<const float> bias,
                            std::span<float> out, Activation act) {
    const std::size_t n_in = in.size();
    for (std::size_t o = 0; o < out.size(); ++o) {
        double acc = bias[o];
        const float* wp = &weights[o * n_in];
        for (std::size_t i = 0; i < n_in; ++i) acc += double(in[i]) * double(wp[i]);
        out[o] = apply_activation(acc, act);
    }
}

inline void max_pool(std::span<const float> in, std::span<float> out, const ConvGeometry& g) {
    for (std::int32_t oy = 0; oy < g.out_h; ++oy)
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            for (std::int32_t c = 0; c < g.in_c; ++c) {
                float m = -std::numeric_limits<float>::infinity();
                for (std::int32_t y = w.y0; y < w.y1; ++y)
                    for (std::int32_t x = w.x0; x < w.x1; ++x)
                        m = std::max(m, in[(static_cast<std::size_t>(y) * g.in_w + x) * g.in_c + c]);
                out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.in_c + c] = m;
            }
        }
}

/// Mean over the in-bounds part of each window (padding is not counted).
inline void avg_pool(std::span<const float> in, std::span<float> out, const ConvGeometry& g) {
    for (std::int32_t oy = 0; oy < g.out_h; ++oy)
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            const double n = double(w.y1 - w.y0) * double(w.x1 - w.x0);
            for (std::int32_t c = 0; c < g.in_c; ++c) {
                double s = 0.0;
                for (std::int32_t y = w.y0; y < w.y1; ++y)
                    for (std::int32_t x = w.x0; x < w.x1; ++x)
                        s += in[(static_cast<std::size_t>(y) * g.in_w + x) * g.in_c + c];
                out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.in_c + c] = static_cast<float>(s / n);
            }
        }
}

inline void relu6(std::span<const float> in, std::span<float> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(in[i], 0.0f, 6.0f);
}

/// Softmax over contiguous rows of length `depth` (the last axis).
inline void softmax(std::span<const float> in, std::span<float> out, std::size_t depth) {
    for (std::size_t r = 0; r + depth <= in.size(); r += depth) {
        float m = -std::numeric_limits<float>::infinity();
        for (std::size_t i = 0; i < depth; ++i) m = std::max(m, in[r + i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < depth; ++i) sum += std::exp(double(in[r + i]) - m);
        for (std::size_t i = 0; i < depth; ++i) out[r + i] = static_cast<float>(std::exp(double(in[r + i]) - m) / sum);
    }
}

inline void add(std::span<const float> a, std::span<const float> b, std::span<float> out, Activation act) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_activation(double(a[i]) + double(b[i]), act);
}

/// Copies `count` blocks of `block` elements into their slot of an output
/// whose blocks are `out_block` long, starting at element `offset` inside
/// each block. Concat along any axis reduces to this.
template <class T, class Convert>
inline void concat_slice(std::span<const T> in, std::span<T> out, std::size_t count, std::size_t block,
                         std::size_t out_block, std::size_t offset, Convert convert) {
    for (std::size_t o = 0; o < count; ++o)
        for (std::size_t i = 0; i < block; ++i) out[o * out_block + offset + i] = convert(in[o * block + i]);
}

// ------------------------------------------------------------------- int8

/// Fixed parameters of an int8 conv / depthwise / fully-connected layer.
struct QuantizedLayerParams {
    std::int32_t input_zero_point = 0;
    std::int32_t weight_zero_point = 0;
    std::int32_t output_zero_point = 0;
    QuantizedMultiplier multiplier; // in_scale * w_scale / out_scale
    std::int32_t act_min = kInt8Min;
    std::int32_t act_max = kInt8Max;
};

/// Output clamp range for a fused activation, in the output's quanta.
inline std::pair<std::int32_t, std::int32_t> quantized_activation_range(Activation act, const QuantParams& out) {
    if (act == Activation::none) return {kInt8Min, kInt8Max};
    const auto lo = saturate_int8(out.zero_point);
    const auto hi = saturate_int8(static_cast<std::int64_t>(out.zero_point + round_half_away(6.0 / out.scale)));
    return {lo, hi};
}

/// Reductions up to this length cannot overflow an int32 accumulator
/// (each product of zero-point-adjusted int8 values is at most 255^2).
inline constexpr std::int64_t kInt32SafeReduction = std::numeric_limits<std::int32_t>::max() / (255 * 255);

inline std::int8_t finish_accumulator(std::int64_t acc, std::int32_t bias, const QuantizedLayerParams& p) noexcept {
    const std::int32_t total = saturate_int32(acc + bias);
    const std::int64_t q = multiply_by_quantized_multiplier(total, p.multiplier) + p.output_zero_point;
    return static_cast<std::int8_t>(std::clamp<std::int64_t>(q, p.act_min, p.act_max));
}

namespace detail {

/// Exact int8 convolution. The zero points are factored out of the inner
/// product, which is then a plain int8 dot product:
///   sum (x - zx)(w - zw) = sum x*w - zw * sum x - zx * sum w + n * zx * zw
/// over the in-bounds part of each window. Sums of w are precomputed for
/// full windows and recomputed for windows clipped by padding.
template <class Acc>
inline void conv2d_i8_impl(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                           std::span<const std::int32_t> bias, std::span<std::int8_t> out, const ConvGeometry& g,
                           const QuantizedLayerParams& p) {
    const std::size_t row = static_cast<std::size_t>(g.kernel_w) * g.in_c;
    const std::size_t kernel = static_cast<std::size_t>(g.kernel_h) * row;
    const Acc zx = p.input_zero_point, zw = p.weight_zero_point;
    std::vector<Acc> full_wsum(static_cast<std::size_t>(g.out_c), 0);
    for (std::int32_t oc = 0; oc < g.out_c; ++oc)
        for (std::size_t i = 0; i < kernel; ++i) full_wsum[oc] += weights[oc * kernel + i];

    for (std::int32_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            const bool clipped = w.y1 - w.y0 != g.kernel_h || w.x1 - w.x0 != g.kernel_w;
            const std::size_t span = static_cast<std::size_t>(w.x1 - w.x0) * g.in_c;
            const Acc n = static_cast<Acc>(span) * (w.y1 - w.y0);
            Acc xsum = 0;
            for (std::int32_t y = w.y0; y < w.y1; ++y) {
                const std::int8_t* src = &in[(static_cast<std::size_t>(y) * g.in_w + w.x0) * g.in_c];
                for (std::size_t i = 0; i < span; ++i) xsum += src[i];
            }
            std::int8_t* dst = &out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.out_c];
            for (std::int32_t oc = 0; oc < g.out_c; ++oc) {
                const std::int8_t* wk = &weights[static_cast<std::size_t>(oc) * kernel];
                Acc dot = 0, wsum = 0;
                for (std::int32_t y = w.y0; y < w.y1; ++y) {
                    const std::int32_t ky = w.ky0 + (y - w.y0);
                    // One kernel row is contiguous in both input and weights.
                    const std::int8_t* src = &in[(static_cast<std::size_t>(y) * g.in_w + w.x0) * g.in_c];
                    const std::int8_t* wp = wk + ky * row + static_cast<std::size_t>(w.kx0) * g.in_c;
                    for (std::size_t i = 0; i < span; ++i) dot += static_cast<Acc>(src[i] * wp[i]);
                    if (clipped)
                        for (std::size_t i = 0; i < span; ++i) wsum += wp[i];
                }
                if (!clipped) wsum = full_wsum[oc];
                const std::int64_t acc = std::int64_t{dot} - std::int64_t{zw} * xsum - std::int64_t{zx} * wsum +
                                         std::int64_t{n} * zx * zw;
                dst[oc] = finish_accumulator(acc, bias[oc], p);
            }
        }
    }
}

} // namespace detail

inline void conv2d(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                   std::span<const std::int32_t> bias, std::span<std::int8_t> out, const ConvGeometry& g,
                   const QuantizedLayerParams& p) {
    if (std::int64_t{g.kernel_h} * g.kernel_w * g.in_c <= kInt32SafeReduction)
        detail::conv2d_i8_impl<std::int32_t>(in, weights, bias, out, g, p);
    else
        detail::conv2d_i8_impl<std::int64_t>(in, weights, bias, out, g, p);
}

namespace detail {

template <class Acc>
inline void depthwise_conv2d_i8_impl(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                                     std::span<const std::int32_t> bias, std::span<std::int8_t> out,
                                     const ConvGeometry& g, const QuantizedLayerParams& p) {
    const std::int32_t C = g.in_c;
    const std::int32_t zx = p.input_zero_point, zw = p.weight_zero_point;
    std::vector<Acc> acc(static_cast<std::size_t>(C));
    for (std::int32_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            std::fill(acc.begin(), acc.end(), 0);
            for (std::int32_t y = w.y0; y < w.y1; ++y) {
                const std::int32_t ky = w.ky0 + (y - w.y0);
                for (std::int32_t x = w.x0; x < w.x1; ++x) {
                    const std::int32_t kx = w.kx0 + (x - w.x0);
                    const std::int8_t* src = &in[(static_cast<std::size_t>(y) * g.in_w + x) * C];
                    const std::int8_t* wp = &weights[(static_cast<std::size_t>(ky) * g.kernel_w + kx) * C];
                    for (std::int32_t c = 0; c < C; ++c)
                        acc[c] += static_cast<Acc>((std::int32_t{src[c]} - zx) * (std::int32_t{wp[c]} - zw));
                }
            }
            std::int8_t* dst = &out[(static_cast<std::size_t>(oy) * g.out_w + ox) * C];
            for (std::int32_t c = 0; c < C; ++c) dst[c] = finish_accumulator(acc[c], bias[c], p);
        }
    }
}

} // namespace detail

inline void depthwise_conv2d(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                             std::span<const std::int32_t> bias, std::span<std::int8_t> out, const ConvGeometry& g,
                             const QuantizedLayerParams& p) {
    if (std::int64_t{g.kernel_h} * g.kernel_w <= kInt32SafeReduction)
        detail::depthwise_conv2d_i8_impl<std::int32_t>(in, weights, bias, out, g, p);
    else
        detail::depthwise_conv2d_i8_impl<std::int64_t>(in, weights, bias, out, g, p);
}

namespace detail {

template <class Acc>
inline void fully_connected_i8_impl(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                                    std::span<const std::int32_t> bias, std::span<std::int8_t> out,
                                    const QuantizedLayerParams& p) {
    const std::size_t n_in = in.size();
    const std::int32_t zx = p.input_zero_point, zw = p.weight_zero_point;
    for (std::size_t o = 0; o < out.size(); ++o) {
        Acc acc = 0;
        const std::int8_t* wp = &weights[o * n_in];
        for (std::size_t i = 0; i < n_in; ++i)
            acc += static_cast<Acc>((std::int32_t{in[i]} - zx) * (std::int32_t{wp[i]} - zw));
        out[o] = finish_accumulator(acc, bias[o], p);
    }
}

} // namespace detail

inline void fully_connected(std::span<const std::int8_t> in, std::span<const std::int8_t> weights,
                            std::span<const std::int32_t> bias, std::span<std::int8_t> out,
                            const QuantizedLayerParams& p) {
    if (static_cast<std::int64_t>(in.size()) <= kInt32SafeReduction)
        detail::fully_connected_i8_impl<std::int32_t>(in, weights, bias, out, p);
    else
        detail::fully_connected_i8_impl<std::int64_t>(in, weights, bias, out, p);
}

/// Moves an int8 value from one quantization to another:
/// clamp(round(M * (q - in_zp)) + out_zp) with M = in_scale / out_scale.
struct Rescale {
    std::int32_t input_zero_point = 0;
    QuantizedMultiplier multiplier;
    std::int32_t output_zero_point = 0;
    std::int32_t act_min = kInt8Min;
    std::int32_t act_max = kInt8Max;

    static Rescale between(const QuantParams& from, const QuantParams& to) {
        return {from.zero_point, quantize_multiplier(from.scale / to.scale), to.zero_point, kInt8Min, kInt8Max};
    }

    std::int8_t operator()(std::int8_t q) const noexcept {
        const std::int64_t v = multiply_by_quantized_multiplier(std::int32_t{q} - input_zero_point, multiplier) +
                               output_zero_point;
        return static_cast<std::int8_t>(std::clamp<std::int64_t>(v, act_min, act_max));
    }
};

inline void max_pool(std::span<const std::int8_t> in, std::span<std::int8_t> out, const ConvGeometry& g,
                     const Rescale& rescale) {
    for (std::int32_t oy = 0; oy < g.out_h; ++oy)
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            for (std::int32_t c = 0; c < g.in_c; ++c) {
                std::int8_t m = std::numeric_limits<std::int8_t>::min();
                for (std::int32_t y = w.y0; y < w.y1; ++y)
                    for (std::int32_t x = w.x0; x < w.x1; ++x)
                        m = std::max(m, in[(static_cast<std::size_t>(y) * g.in_w + x) * g.in_c + c]);
                out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.in_c + c] = rescale(m);
            }
        }
}

/// Multipliers for int8 average pooling: entry n is in_scale / (out_scale * n),
/// so the window mean is rounded exactly once.
inline std::vector<QuantizedMultiplier> avg_pool_multipliers(const QuantParams& in, const QuantParams& out,
                                                             std::int32_t max_window) {
    std::vector<QuantizedMultiplier> m(static_cast<std::size_t>(max_window) + 1);
    for (std::int32_t n = 1; n <= max_window; ++n) m[n] = quantize_multiplier(in.scale / (out.scale * n));
    return m;
}

inline void avg_pool(std::span<const std::int8_t> in, std::span<std::int8_t> out, const ConvGeometry& g,
                     std::int32_t in_zero_point, std::int32_t out_zero_point,
                     std::span<const QuantizedMultiplier> per_count) {
    for (std::int32_t oy = 0; oy < g.out_h; ++oy)
        for (std::int32_t ox = 0; ox < g.out_w; ++ox) {
            const Window w = window_at(g, oy, ox);
            const auto n = (w.y1 - w.y0) * (w.x1 - w.x0);
            for (std::int32_t c = 0; c < g.in_c; ++c) {
                std::int64_t s = 0;
                for (std::int32_t y = w.y0; y < w.y1; ++y)
                    for (std::int32_t x = w.x0; x < w.x1; ++x)
                        s += in[(static_cast<std::size_t>(y) * g.in_w + x) * g.in_c + c] - in_zero_point;
                const std::int64_t q = multiply_by_quantized_multiplier(saturate_int32(s), per_count[n]) + out_zero_point;
                out[(static_cast<std::size_t>(oy) * g.out_w + ox) * g.in_c + c] = static_cast<std::int8_t>(saturate_int8(q));
            }
        }
}

/// relu6 in the quantized domain: rescale, then clamp to [q(0), q(6)].
inline void relu6(std::span<const std::int8_t> in, std::span<std::int8_t> out, const Rescale& rescale_with_bounds) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = rescale_with_bounds(in[i]);
}

inline void rescale(std::span<const std::int8_t> in, std::span<std::int8_t> out, const Rescale& r) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = r(in[i]);
}

/// Table of round(2^16 * exp(-in_scale * k)) for k = 0..255: exponentials of
/// every possible distance below the row maximum.
inline std::vector<std::uint32_t> softmax_exp_table(double in_scale) {
    std::vector<std::uint32_t> t(256);
    for (int k = 0; k < 256; ++k)
        t[k] = static_cast<std::uint32_t>(round_half_away(65536.0 * std::exp(-in_scale * k)));
    return t;
}

inline constexpr int kSoftmaxProbBits = 30;

/// Integer softmax over rows of `depth`. Probabilities are formed in Q30
/// from the exp table, then requantized by `prob_multiplier`
/// (= 2^-30 / out_scale).
inline void softmax(std::span<const std::int8_t> in, std::span<std::int8_t> out, std::size_t depth,
                    std::span<const std::uint32_t> exp_table, const QuantizedMultiplier& prob_multiplier,
                    std::int32_t out_zero_point) {
    for (std::size_t r = 0; r + depth <= in.size(); r += depth) {
        std::int8_t m = std::numeric_limits<std::int8_t>::min();
        for (std::size_t i = 0; i < depth; ++i) m = std::max(m, in[r + i]);
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < depth; ++i) sum += exp_table[static_cast<std::size_t>(m - in[r + i])];
        for (std::size_t i = 0; i < depth; ++i) {
            const std::uint64_t num = std::uint64_t{exp_table[static_cast<std::size_t>(m - in[r + i])]} << kSoftmaxProbBits;
            const auto prob = static_cast<std::int64_t>((2 * num + sum) / (2 * sum));
            out[r + i] = static_cast<std::int8_t>(
                saturate_int8(multiply_by_quantized_multiplier(prob, prob_multiplier) + out_zero_point));
        }
    }
}

struct QuantizedAddParams {
    std::int32_t a_zero_point = 0, b_zero_point = 0, out_zero_point = 0;
    QuantizedMultiplier a_multiplier, b_multiplier; // operand scale / out scale
    std::int32_t act_min = kInt8Min, act_max = kInt8Max;
};

/// Both operands are rescaled to the output scale and summed with a single
/// rounding step.
inline void add(std::span<const std::int8_t> a, std::span<const std::int8_t> b, std::span<std::int8_t> out,
                const QuantizedAddParams& p) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::int64_t v = multiply_add_quantized(std::int32_t{a[i]} - p.a_zero_point, p.a_multiplier,
                                                      std::int32_t{b[i]} - p.b_zero_point, p.b_multiplier) +
                               p.out_zero_point;
        out[i] = static_cast<std::int8_t>(std::clamp<std::int64_t>(v, p.act_min, p.act_max));
    }
}

} // namespace rockhunt::kernels
