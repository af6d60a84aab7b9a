// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Detector post-processing: YOLO-style head decoding, IoU, greedy NMS,
// per-frame counting and box overlays.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rockhunt/error.hpp"
#include "rockhunt/image_io.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {

struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0; // pixels
    std::int32_t class_id = 0;
    double confidence = 0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }

    bool operator==(const BBox&) const = default;
};

struct Anchor {
    double width = 0, height = 0; // pixels
};

/// One detection head: anchor priors, grid cell size and class count.
struct HeadSpec {
    std::vector<Anchor> anchors;
    double cell_w = 32, cell_h = 32;
    std::int32_t num_classes = 1;
};

inline constexpr double kDefaultConfThreshold = 0.25;
inline constexpr double kDefaultIouThreshold = 0.45;

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

/// Decodes a raw head of shape (gh, gw, A * (5 + C)), optionally with a
/// leading batch of 1. Per cell and anchor the channels are
/// (tx, ty, tw, th, objectness, class logits...):
///   center = (cell + sigmoid(t_xy)) * cell size, extent = anchor * exp(t_wh),
///   confidence = sigmoid(objectness) * sigmoid(best class logit).
/// Boxes are clipped to the frame (default: the grid's pixel extent) and
/// emitted in cell-major, anchor-minor order when confidence >= conf_thresh.
inline std::vector<BBox> decode_head(const Tensor& raw, const HeadSpec& head, double conf_thresh,
                                     double frame_w = -1, double frame_h = -1) {
    Shape s = raw.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() != 3) throw ShapeError("head output must be (gh, gw, channels), got " + shape_str(raw.shape()));
    if (head.num_classes < 1) throw ArgumentError("head needs at least one class");
    if (head.anchors.empty()) throw ArgumentError("head needs at least one anchor");
    for (const auto& a : head.anchors)
        if (!(a.width > 0 && a.height > 0)) throw ArgumentError("anchor extents must be positive");
    const std::int32_t per_anchor = 5 + head.num_classes;
    if (s[2] % per_anchor != 0)
        throw ShapeError("channel count " + std::to_string(s[2]) + " is not a multiple of 5 + classes = " +
                         std::to_string(per_anchor));
    if (s[2] / per_anchor != static_cast<std::int32_t>(head.anchors.size()))
        throw ShapeError("head has " + std::to_string(s[2] / per_anchor) + " anchors per cell, spec lists " +
                         std::to_string(head.anchors.size()));
    const std::int32_t gh = s[0], gw = s[1], ch = s[2];
    if (frame_w < 0) frame_w = gw * head.cell_w;
    if (frame_h < 0) frame_h = gh * head.cell_h;

    const Tensor real = raw.dtype() == DType::int8 ? dequantize(raw) : raw;
    const auto values = real.data<float>();
    std::vector<BBox> out;
    for (std::int32_t gy = 0; gy < gh; ++gy)
        for (std::int32_t gx = 0; gx < gw; ++gx)
            for (std::size_t a = 0; a < head.anchors.size(); ++a) {
                const float* v = &values[(static_cast<std::size_t>(gy) * gw + gx) * ch + a * per_anchor];
                std::int32_t best = 0;
                for (std::int32_t c = 1; c < head.num_classes; ++c)
                    if (v[5 + c] > v[5 + best]) best = c;
                const double conf = sigmoid(v[4]) * sigmoid(v[5 + best]);
                if (!(conf >= conf_thresh)) continue;
                const double cx = (gx + sigmoid(v[0])) * head.cell_w;
                const double cy = (gy + sigmoid(v[1])) * head.cell_h;
                const double w = head.anchors[a].width * std::exp(double(v[2]));
                const double h = head.anchors[a].height * std::exp(double(v[3]));
                BBox b;
                b.x_min = std::clamp(cx - w / 2, 0.0, frame_w);
                b.y_min = std::clamp(cy - h / 2, 0.0, frame_h);
                b.x_max = std::clamp(cx + w / 2, 0.0, frame_w);
                b.y_max = std::clamp(cy + h / 2, 0.0, frame_h);
                b.class_id = best;
                b.confidence = conf;
                if (!(b.x_min < b.x_max && b.y_min < b.y_max)) continue;
                out.push_back(b);
            }
    return out;
}

inline double iou(const BBox& a, const BBox& b) noexcept {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? std::min(1.0, inter / uni) : 0.0;
}

/// NMS ranking: confidence descending, then x_min, y_min, x_max, y_max and
/// class ascending, so equal-confidence ties resolve the same way every run.
inline bool ranks_before(const BBox& a, const BBox& b) noexcept {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.x_min != b.x_min) return a.x_min < b.x_min;
    if (a.y_min != b.y_min) return a.y_min < b.y_min;
    if (a.x_max != b.x_max) return a.x_max < b.x_max;
    if (a.y_max != b.y_max) return a.y_max < b.y_max;
    return a.class_id < b.class_id;
}

/// Greedy per-class NMS: walk boxes in rank order and keep each one that
/// has IoU < iou_thresh with every kept box of its class.
inline std::vector<BBox> nms(std::vector<BBox> boxes, double iou_thresh = kDefaultIouThreshold) {
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) throw ArgumentError("iou threshold must be in (0, 1)");
    std::stable_sort(boxes.begin(), boxes.end(), ranks_before);
    std::vector<BBox> kept;
    for (const auto& b : boxes) {
        bool suppressed = false;
        for (const auto& k : kept)
            if (k.class_id == b.class_id && iou(k, b) >= iou_thresh) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(b);
    }
    return kept;
}

struct CountSummary {
    std::vector<std::size_t> counts;             // per frame, input order
    std::map<std::size_t, std::size_t> histogram; // count -> frames
    std::size_t min = 0, max = 0;
    double mean = 0;
};

/// Per-frame number of `rock_class` boxes (NMS already applied).
inline CountSummary count_rocks(std::span<const std::vector<BBox>> frames, std::int32_t rock_class = 0) {
    CountSummary s;
    for (const auto& f : frames) {
        const auto n = static_cast<std::size_t>(
            std::count_if(f.begin(), f.end(), [&](const BBox& b) { return b.class_id == rock_class; }));
        s.counts.push_back(n);
        ++s.histogram[n];
    }
    if (!s.counts.empty()) {
        s.min = *std::min_element(s.counts.begin(), s.counts.end());
        s.max = *std::max_element(s.counts.begin(), s.counts.end());
        s.mean = double(std::accumulate(s.counts.begin(), s.counts.end(), std::size_t{0})) / double(s.counts.size());
    }
    return s;
}

// ----------------------------------------------------------------- overlays

struct OverlayOptions {
    bool draw_labels = false; // "rock 0.87" above each box
    std::vector<std::string> class_names = {"rock"};
};

inline std::string class_label(std::int32_t id, const std::vector<std::string>& names) {
    if (id >= 0 && static_cast<std::size_t>(id) < names.size()) return names[static_cast<std::size_t>(id)];
    return "class" + std::to_string(id);
}

/// Fixed RGB color for a class id.
inline std::array<std::uint8_t, 3> class_color(std::int32_t id) noexcept {
    static constexpr std::array<std::array<std::uint8_t, 3>, 6> palette{{
        {255, 48, 48}, {48, 220, 48}, {64, 128, 255}, {255, 224, 0}, {255, 0, 255}, {0, 224, 224},
    }};
    return palette[static_cast<std::size_t>(id < 0 ? -id : id) % palette.size()];
}

/// "t001\trock\t0.870\t10\t10\t50\t50": tile, class, confidence, rounded corners.
inline std::string annotation_record(const std::string& tile_id, const BBox& b,
                                     const std::vector<std::string>& class_names) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "\t%.3f\t%ld\t%ld\t%ld\t%ld", b.confidence, std::lround(b.x_min),
                  std::lround(b.y_min), std::lround(b.x_max), std::lround(b.y_max));
    return tile_id + '\t' + class_label(b.class_id, class_names) + buf;
}

namespace detail {

/// 3x5 glyphs, one byte per row, bit 2 = leftmost column.
inline std::array<std::uint8_t, 5> glyph(char c) noexcept {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    switch (c) {
    case '0': return {7, 5, 5, 5, 7};
    case '1': return {2, 6, 2, 2, 7};
    case '2': return {7, 1, 7, 4, 7};
    case '3': return {7, 1, 7, 1, 7};
    case '4': return {5, 5, 7, 1, 1};
    case '5': return {7, 4, 7, 1, 7};
    case '6': return {7, 4, 7, 5, 7};
    case '7': return {7, 1, 1, 1, 1};
    case '8': return {7, 5, 7, 5, 7};
    case '9': return {7, 5, 7, 1, 7};
    case '.': return {0, 0, 0, 0, 2};
    case '-': return {0, 0, 7, 0, 0};
    case '_': return {0, 0, 0, 0, 7};
    case 'A': return {2, 5, 7, 5, 5};
    case 'B': return {6, 5, 6, 5, 6};
    case 'C': return {3, 4, 4, 4, 3};
    case 'D': return {6, 5, 5, 5, 6};
    case 'E': return {7, 4, 6, 4, 7};
    case 'F': return {7, 4, 6, 4, 4};
    case 'G': return {3, 4, 5, 5, 3};
    case 'H': return {5, 5, 7, 5, 5};
    case 'I': return {7, 2, 2, 2, 7};
    case 'J': return {1, 1, 1, 5, 2};
    case 'K': return {5, 5, 6, 5, 5};
    case 'L': return {4, 4, 4, 4, 7};
    case 'M': return {5, 7, 7, 5, 5};
    case 'N': return {6, 5, 5, 5, 5};
    case 'O': return {2, 5, 5, 5, 2};
    case 'P': return {6, 5, 6, 4, 4};
    case 'Q': return {2, 5, 5, 6, 3};
    case 'R': return {6, 5, 6, 5, 5};
    case 'S': return {3, 4, 2, 1, 6};
    case 'T': return {7, 2, 2, 2, 2};
    case 'U': return {5, 5, 5, 5, 7};
    case 'V': return {5, 5, 5, 5, 2};
    case 'W': return {5, 5, 7, 7, 5};
    case 'X': return {5, 5, 2, 5, 5};
    case 'Y': return {5, 5, 2, 2, 2};
    case 'Z': return {7, 1, 2, 4, 7};
    default: return {0, 0, 0, 0, 0};
    }
}

class Canvas {
public:
    explicit Canvas(const Tensor& image) : shape_(image.shape()) {
        if (shape_.size() != 3 || shape_[2] != 3) throw ShapeError("overlay needs an (H, W, 3) tile");
        auto d = image.data<float>();
        px_.assign(d.begin(), d.end());
    }

    void put(long x, long y, const std::array<std::uint8_t, 3>& rgb) {
        if (x < 0 || y < 0 || x >= shape_[1] || y >= shape_[0]) return;
        float* p = &px_[(static_cast<std::size_t>(y) * shape_[1] + static_cast<std::size_t>(x)) * 3];
        for (int c = 0; c < 3; ++c) p[c] = rgb[c] / 255.0f;
    }

    void rect(long x0, long y0, long x1, long y1, const std::array<std::uint8_t, 3>& rgb) {
        for (long x = x0; x <= x1; ++x) {
            put(x, y0, rgb);
            put(x, y1, rgb);
        }
        for (long y = y0; y <= y1; ++y) {
            put(x0, y, rgb);
            put(x1, y, rgb);
        }
    }

    void text(long x, long y, const std::string& s, const std::array<std::uint8_t, 3>& rgb) {
        for (char ch : s) {
            const auto g = glyph(ch);
            for (int r = 0; r < 5; ++r)
                for (int c = 0; c < 3; ++c)
                    if (g[r] & (4 >> c)) put(x + c, y + r, rgb);
            x += 4;
        }
    }

    Tensor tensor() && { return Tensor(shape_, std::move(px_)); }

private:
    Shape shape_;
    std::vector<float> px_;
};

} // namespace detail

/// Copy of `tile` (H, W, 3) with a 1-pixel rectangle in the class color at
/// each box's rounded corners.
inline Tensor draw_boxes(const Tensor& tile, std::span<const BBox> boxes, const OverlayOptions& opts = {}) {
    detail::Canvas canvas(tile);
    for (const auto& b : boxes) {
        const auto color = class_color(b.class_id);
        const long x0 = std::lround(b.x_min), y0 = std::lround(b.y_min);
        canvas.rect(x0, y0, std::lround(b.x_max), std::lround(b.y_max), color);
        if (opts.draw_labels) {
            char conf[16];
            std::snprintf(conf, sizeof conf, " %.2f", b.confidence);
            canvas.text(x0, y0 >= 7 ? y0 - 6 : y0 + 2, class_label(b.class_id, opts.class_names) + conf, color);
        }
    }
    return std::move(canvas).tensor();
}

struct Overlay {
    std::vector<std::uint8_t> png;
    std::vector<std::string> records;
};

inline Overlay emit_overlay(const Tensor& tile, std::span<const BBox> boxes, const std::string& tile_id,
                            const OverlayOptions& opts = {}) {
    Overlay o;
    o.png = encode_png(draw_boxes(tile, boxes, opts));
    for (const auto& b : boxes) o.records.push_back(annotation_record(tile_id, b, opts.class_names));
    return o;
}

} // namespace rockhunt
