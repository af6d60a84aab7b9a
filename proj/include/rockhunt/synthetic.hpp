// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic data and hand-built models used by the tests,
// the acceptance run and the fixtures tool. Nothing here is trained.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rockhunt/dataset.hpp"
#include "rockhunt/detection.hpp"
#include "rockhunt/engine.hpp"
#include "rockhunt/evaluation.hpp"
#include "rockhunt/graph.hpp"
#include "rockhunt/prng.hpp"

namespace rockhunt::synthetic {

// --------------------------------------------------------- terrain tiles

inline constexpr std::int32_t kTileSize = 64;

/// Class indices follow kClassNames: other (soil), rock, rover.
enum TileClass : std::int32_t { soil = 0, rock = 1, rover = 2 };

namespace detail {

struct Canvas {
    std::int32_t size;
    std::vector<float> px; // (size, size, 3)

    explicit Canvas(std::int32_t n) : size(n), px(static_cast<std::size_t>(n) * n * 3, 0.0f) {}

    float* at(std::int32_t x, std::int32_t y) { return &px[(static_cast<std::size_t>(y) * size + x) * 3]; }

    void shift(std::int32_t x, std::int32_t y, float d) {
        float* p = at(x, y);
        for (int c = 0; c < 3; ++c) p[c] += d;
    }

    void set_gray(std::int32_t x, std::int32_t y, float v) {
        float* p = at(x, y);
        for (int c = 0; c < 3; ++c) p[c] = v;
    }

    Tensor finish() && {
        for (auto& v : px) v = std::clamp(v, 0.0f, 1.0f);
        return Tensor({size, size, 3}, std::move(px));
    }
};

/// Dusty ground: a tinted base with a faint illumination gradient and fine
/// grain of standard deviation `grain`.
inline Canvas soil_base(Xoshiro256& rng, std::int32_t n, double grain) {
    Canvas c(n);
    const double r = rng.uniform(0.50, 0.62), g = r * rng.uniform(0.72, 0.80), b = r * rng.uniform(0.55, 0.62);
    const double gx = rng.uniform(-0.0006, 0.0006), gy = rng.uniform(-0.0006, 0.0006);
    for (std::int32_t y = 0; y < n; ++y)
        for (std::int32_t x = 0; x < n; ++x) {
            const double light = gx * (x - n / 2) + gy * (y - n / 2) + grain * rng.normal();
            float* p = c.at(x, y);
            p[0] = static_cast<float>(r + light);
            p[1] = static_cast<float>(g + light);
            p[2] = static_cast<float>(b + light);
        }
    return c;
}

} // namespace detail

/// One 64x64 tile. Rocks differ from soil only by faint surface texture and
/// a slight shadow, which is the hard, low-contrast case; rover hardware is
/// bright panels and dark struts.
inline Tensor render_tile(TileClass cls, Xoshiro256& rng, std::int32_t n = kTileSize) {
    auto c = detail::soil_base(rng, n, rng.uniform(0.003, 0.005));
    if (cls == rock) {
        const int blobs = static_cast<int>(rng.between(3, 5));
        const double texture = rng.uniform(0.016, 0.026);
        for (int k = 0; k < blobs; ++k) {
            const double cx = rng.uniform(8, n - 8), cy = rng.uniform(8, n - 8);
            const double rx = rng.uniform(9, 18), ry = rng.uniform(7, 15);
            const double shade = rng.uniform(0.0, 0.025);
            for (std::int32_t y = 0; y < n; ++y)
                for (std::int32_t x = 0; x < n; ++x) {
                    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
                    if (dx * dx + dy * dy <= 1.0)
                        c.shift(x, y, static_cast<float>(-shade + texture * rng.normal()));
                }
        }
    } else if (cls == rover) {
        const int panels = static_cast<int>(rng.between(1, 3));
        for (int k = 0; k < panels; ++k) {
            const auto x0 = static_cast<std::int32_t>(rng.between(0, n - 16));
            const auto y0 = static_cast<std::int32_t>(rng.between(0, n - 12));
            const auto w = static_cast<std::int32_t>(rng.between(10, std::min<std::int64_t>(30, n - x0)));
            const auto h = static_cast<std::int32_t>(rng.between(8, std::min<std::int64_t>(24, n - y0)));
            const float v = static_cast<float>(rng.uniform(0.82, 0.95));
            for (std::int32_t y = y0; y < y0 + h; ++y)
                for (std::int32_t x = x0; x < x0 + w; ++x) c.set_gray(x, y, v);
        }
        const int struts = static_cast<int>(rng.between(1, 3));
        for (int k = 0; k < struts; ++k) {
            const bool horizontal = rng.below(2) == 0;
            const auto at = static_cast<std::int32_t>(rng.between(2, n - 5));
            const auto thick = static_cast<std::int32_t>(rng.between(2, 3));
            const float v = static_cast<float>(rng.uniform(0.05, 0.15));
            for (std::int32_t i = 0; i < n; ++i)
                for (std::int32_t t = 0; t < thick; ++t) horizontal ? c.set_gray(i, at + t, v) : c.set_gray(at + t, i, v);
        }
    }
    return std::move(c).finish();
}

/// `per_class` tiles of each class, interleaved soil, rock, rover, ...
inline std::vector<EvalExample> make_tile_corpus(std::size_t per_class, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<EvalExample> out;
    for (std::size_t i = 0; i < per_class; ++i)
        for (auto cls : {soil, rock, rover}) out.push_back({render_tile(cls, rng), cls});
    return out;
}

inline constexpr std::uint64_t kCorpusSeed = 600;
inline constexpr std::uint64_t kDesignSeed = 4242;

// ------------------------------------------------------ texture classifier

namespace detail {

/// conv 3x3 (same, relu6) with four fixed filters on luminance:
///   0: +gain * laplacian (pits and grain)
///   1: -gain * laplacian
///   2: bright mask  relu6(k * (lum - 0.72))
///   3: dark mask    relu6(k * (0.22 - lum))
/// followed by a global mean.
struct FeatureFilters {
    static constexpr double kTextureGain = 1.0;
    static constexpr double kMaskGain = 12.0;

    static Tensor weights() {
        std::vector<float> w(4 * 3 * 3 * 3, 0.0f);
        const auto idx = [](int oc, int ky, int kx, int ic) { return ((oc * 3 + ky) * 3 + kx) * 3 + ic; };
        static constexpr int lap[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                for (int ic = 0; ic < 3; ++ic) {
                    const double l = lap[ky][kx] * kTextureGain / 3.0;
                    w[idx(0, ky, kx, ic)] = static_cast<float>(l);
                    w[idx(1, ky, kx, ic)] = static_cast<float>(-l);
                }
        for (int ic = 0; ic < 3; ++ic) {
            w[idx(2, 1, 1, ic)] = static_cast<float>(kMaskGain / 3.0);
            w[idx(3, 1, 1, ic)] = static_cast<float>(-kMaskGain / 3.0);
        }
        return Tensor({4, 3, 3, 3}, std::move(w));
    }

    static Tensor bias() {
        return Tensor({4}, std::vector<float>{0.0f, 0.0f, static_cast<float>(-kMaskGain * 0.72),
                                              static_cast<float>(kMaskGain * 0.22)});
    }
};

/// Graph up to the pooled (1, 4) feature vector; returns the feature id.
inline TensorId add_feature_stage(GraphBuilder& b, TensorId x) {
    // valid padding: zero padding would add a strong artificial edge.
    auto f = b.conv2d(x, FeatureFilters::weights(), FeatureFilters::bias(),
                      {1, 1, Padding::valid, Activation::relu6});
    constexpr std::int32_t n = kTileSize - 2;
    auto p = b.avg_pool(f, {n, n, n, n, Padding::valid});
    return b.reshape(p, {1, 4});
}

} // namespace detail

/// Builds the classifier: fixed feature filters and a hand-set linear
/// layer over the pooled features (t = texture, m = bright + dark masks):
///   soil  = 0
///   rock  = kTextureWeight * (t - tau)
///   rover = kMaskWeight * m - 1
/// The only fitted quantity is tau, the midpoint between the mean soil and
/// mean rock texture of the `design` tiles.
inline ModelGraph build_texture_classifier(std::span<const EvalExample> design) {
    constexpr double kTextureWeight = 200.0, kMaskWeight = 2000.0;

    GraphBuilder fb;
    auto fin = fb.input({1, kTileSize, kTileSize, 3});
    fb.output(detail::add_feature_stage(fb, fin));
    const auto features_graph = fb.build();
    Interpreter fx(features_graph);

    double sum[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (const auto& ex : design) {
        if (ex.label != soil && ex.label != rock) continue;
        const auto r = fx.invoke(ex.image.reshaped({1, kTileSize, kTileSize, 3}));
        const auto f = r.outputs[0].data<float>();
        sum[ex.label] += double(f[0]) + f[1];
        ++n[ex.label];
    }
    if (n[0] == 0 || n[1] == 0) throw ArgumentError("design set needs soil and rock tiles");
    const double tau = (sum[0] / double(n[0]) + sum[1] / double(n[1])) / 2;

    const auto tw = static_cast<float>(kTextureWeight), mw = static_cast<float>(kMaskWeight);
    std::vector<float> w = {0, 0, 0, 0, tw, tw, 0, 0, 0, 0, mw, mw};
    std::vector<float> bias = {0, static_cast<float>(-kTextureWeight * tau), -1};

    GraphBuilder gb;
    auto x = gb.input({1, kTileSize, kTileSize, 3});
    auto f = detail::add_feature_stage(gb, x);
    auto logits = gb.fully_connected(f, Tensor({3, 4}, std::move(w)), Tensor({3}, std::move(bias)));
    gb.output(gb.softmax(logits));
    return gb.build();
}

// ---------------------------------------------------- MobileNetV2-style net

namespace detail {

inline Tensor random_weights(Shape shape, double fan_in, Xoshiro256& rng) {
    const auto n = static_cast<std::size_t>(element_count(shape));
    std::vector<float> w(n);
    const double sd = std::sqrt(2.0 / fan_in);
    for (auto& v : w) v = static_cast<float>(sd * rng.normal());
    return Tensor(std::move(shape), std::move(w));
}

inline Tensor random_bias(std::int32_t n, Xoshiro256& rng) {
    std::vector<float> b(static_cast<std::size_t>(n));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-0.05, 0.05));
    return Tensor({n}, std::move(b));
}

inline TensorId pointwise(GraphBuilder& g, TensorId x, std::int32_t cin, std::int32_t cout, Activation act,
                          Xoshiro256& rng) {
    return g.conv2d(x, random_weights({cout, 1, 1, cin}, cin, rng), random_bias(cout, rng), {1, 1, Padding::same, act});
}

inline TensorId inverted_residual(GraphBuilder& g, TensorId x, std::int32_t cin, std::int32_t cout,
                                  std::int32_t expand, std::int32_t stride, Xoshiro256& rng) {
    const std::int32_t mid = cin * expand;
    auto h = pointwise(g, x, cin, mid, Activation::relu6, rng);
    h = g.depthwise_conv2d(h, random_weights({1, 3, 3, mid}, 9, rng), random_bias(mid, rng),
                           {stride, stride, Padding::same, Activation::relu6});
    h = pointwise(g, h, mid, cout, Activation::none, rng);
    if (stride == 1 && cin == cout) h = g.add(h, x);
    return h;
}

} // namespace detail

/// Random-weight MobileNetV2-style classifier on 64x64x3 input, about 112k
/// parameters. Used for size, memory and latency ratios, not accuracy.
inline ModelGraph build_mobilenet_fixture(std::uint64_t seed = 7) {
    Xoshiro256 rng(seed);
    GraphBuilder g;
    auto x = g.input({1, kTileSize, kTileSize, 3});
    auto h = g.conv2d(x, detail::random_weights({16, 3, 3, 3}, 27, rng), detail::random_bias(16, rng),
                      {2, 2, Padding::same, Activation::relu6});
    h = detail::inverted_residual(g, h, 16, 16, 4, 1, rng);
    h = detail::inverted_residual(g, h, 16, 32, 6, 2, rng);
    h = detail::inverted_residual(g, h, 32, 32, 6, 1, rng);
    h = detail::inverted_residual(g, h, 32, 64, 6, 2, rng);
    h = detail::inverted_residual(g, h, 64, 64, 6, 1, rng);
    h = detail::pointwise(g, h, 64, 256, Activation::relu6, rng);
    h = g.avg_pool(h, {8, 8, 8, 8, Padding::valid});
    h = g.reshape(h, {1, 256});
    h = g.fully_connected(h, detail::random_weights({3, 256}, 256, rng), detail::random_bias(3, rng));
    g.output(g.softmax(h));
    return g.build();
}

// ---------------------------------------------------------- rock detector

inline constexpr std::int32_t kFrameSize = 128;
inline constexpr std::int32_t kDetectorCell = 16;
inline constexpr std::int32_t kDetectorGrid = kFrameSize / kDetectorCell;

/// Head layout the detector fixture emits: two anchors, one class.
inline HeadSpec detector_head() { return {{{12, 12}, {14, 14}}, double(kDetectorCell), double(kDetectorCell), 1}; }

/// Frame with `rocks` bright pebbles on dark ground, at most one per grid
/// cell, each near its cell center. Returns the frame and the planted
/// boxes (pixel corners, 12x12 around each center).
struct PlantedFrame {
    Tensor image; // (128, 128, 3)
    std::vector<BBox> rocks;
};

inline PlantedFrame render_rock_frame(std::size_t rocks, Xoshiro256& rng) {
    constexpr std::int32_t cells = kDetectorGrid * kDetectorGrid;
    if (rocks > static_cast<std::size_t>(cells)) throw ArgumentError("at most one rock per detector cell");
    std::vector<std::int32_t> slots(cells);
    for (std::int32_t i = 0; i < cells; ++i) slots[i] = i;
    shuffle(slots, rng);
    slots.resize(rocks);
    std::sort(slots.begin(), slots.end());

    detail::Canvas c(kFrameSize);
    for (std::int32_t y = 0; y < kFrameSize; ++y)
        for (std::int32_t x = 0; x < kFrameSize; ++x) c.set_gray(x, y, static_cast<float>(0.28 + 0.02 * rng.normal()));
    PlantedFrame f;
    for (auto s : slots) {
        const double cx = (s % kDetectorGrid) * kDetectorCell + kDetectorCell / 2.0 + rng.uniform(-1.5, 1.5);
        const double cy = (s / kDetectorGrid) * kDetectorCell + kDetectorCell / 2.0 + rng.uniform(-1.5, 1.5);
        const double r = rng.uniform(4.5, 5.5);
        const float v = static_cast<float>(rng.uniform(0.80, 0.92));
        for (std::int32_t y = 0; y < kFrameSize; ++y)
            for (std::int32_t x = 0; x < kFrameSize; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r) c.set_gray(x, y, v);
            }
        f.rocks.push_back({cx - 6, cy - 6, cx + 6, cy + 6, 0, 1.0});
    }
    f.image = std::move(c).finish();
    return f;
}

/// Hand-built single-class detector: luminance threshold, per-cell mean,
/// then a 1x1 conv that writes objectness and class logits for two anchors
/// and zero box offsets. Output (1, 8, 8, 12) matches detector_head().
inline ModelGraph build_rock_detector() {
    GraphBuilder g;
    auto x = g.input({1, kFrameSize, kFrameSize, 3});
    auto lum = g.conv2d(x, Tensor({1, 1, 1, 3}, std::vector<float>(3, 1.0f / 3.0f)), Tensor({1}, std::vector<float>{-0.45f}),
                        {1, 1, Padding::same, Activation::relu6});
    auto cell = g.avg_pool(lum, {kDetectorCell, kDetectorCell, kDetectorCell, kDetectorCell, Padding::valid});
    // A pebble of radius ~5 covers ~30% of its cell, adding ~0.13 to the
    // cell mean; empty cells stay at ~0.
    constexpr float gain = 150.0f, threshold = 0.05f;
    std::vector<float> w(12, 0.0f), b(12, 0.0f);
    for (int a = 0; a < 2; ++a) {
        w[a * 6 + 4] = gain;
        b[a * 6 + 4] = -gain * threshold;
        b[a * 6 + 5] = a == 0 ? 6.0f : 4.0f; // class logit: the smaller anchor ranks first
    }
    auto head = g.conv2d(cell, Tensor({12, 1, 1, 1}, std::move(w)), Tensor({12}, std::move(b)),
                         {1, 1, Padding::same, Activation::none});
    g.output(head);
    return g.build();
}

/// Frames with 0..max_rocks planted rocks (one frame per count), in order.
inline std::vector<PlantedFrame> make_rock_frames(std::size_t max_rocks, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<PlantedFrame> frames;
    for (std::size_t n = 0; n <= max_rocks; ++n) frames.push_back(render_rock_frame(n, rng));
    return frames;
}

/// Runs the detector on one frame and applies decode + NMS.
inline std::vector<BBox> detect(Interpreter& interp, const ModelGraph& g, const Tensor& frame,
                                double conf = kDefaultConfThreshold, double iou_thresh = kDefaultIouThreshold) {
    auto r = interp.invoke(prepare_input(g, frame));
    return nms(decode_head(r.outputs.at(0), detector_head(), conf), iou_thresh);
}

} // namespace rockhunt::synthetic
