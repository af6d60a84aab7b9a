// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Post-training quantization: absolute min/max calibration of every
// activation tensor, per-tensor int8 weights, int32 biases.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <thread>
#include <vector>

#include "rockhunt/engine.hpp"
#include "rockhunt/graph.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {

struct TensorRange {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::size_t count = 0; // calibration images that reached this tensor

    void observe(std::span<const float> values) {
        for (float v : values) {
            if (std::isnan(v)) continue;
            min = std::min(min, double(v));
            max = std::max(max, double(v));
        }
        ++count;
    }

    void merge(const TensorRange& o) {
        min = std::min(min, o.min);
        max = std::max(max, o.max);
        count += o.count;
    }

    bool operator==(const TensorRange&) const = default;
};

/// Observed ranges of the activation tensors (graph inputs and layer
/// outputs) of a float graph.
struct CalibrationStats {
    std::map<TensorId, TensorRange> tensors;
    std::size_t samples = 0;

    void merge(const CalibrationStats& o) {
        for (const auto& [id, r] : o.tensors) tensors[id].merge(r);
        samples += o.samples;
    }

    bool operator==(const CalibrationStats&) const = default;
};

namespace detail {

inline Tensor as_graph_input(const ModelGraph& g, const Tensor& image) {
    const auto& d = g.tensor(g.inputs.at(0));
    if (image.dtype() != DType::float32) throw DTypeError("calibration images must be float32");
    if (image.shape() == d.shape) return image;
    if (image.size() != static_cast<std::size_t>(element_count(d.shape)))
        throw ShapeError("calibration image " + shape_str(image.shape()) + " does not fit input " + shape_str(d.shape));
    return image.reshaped(d.shape);
}

inline CalibrationStats calibrate_range(const ModelGraph& g, std::span<const Tensor> images) {
    CalibrationStats stats;
    Interpreter interp(g);
    RunOptions opts;
    opts.observer = [&](TensorId id, const Tensor& t) { stats.tensors[id].observe(t.data<float>()); };
    for (const auto& img : images) {
        interp.invoke(as_graph_input(g, img), opts);
        ++stats.samples;
    }
    return stats;
}

} // namespace detail

/// Runs float inference over `images` and folds every activation's min/max.
/// With threads > 1 the images are split into contiguous chunks, each with
/// its own interpreter; the fold is order-independent so the result is the
/// same for any thread count.
inline CalibrationStats calibrate(const ModelGraph& g, std::span<const Tensor> images, unsigned threads = 1) {
    if (images.empty()) throw QuantizeError("calibration set is empty");
    if (g.is_quantized()) throw QuantizeError("calibration needs a float32 graph");
    if (g.inputs.size() != 1) throw QuantizeError("calibration supports single-input graphs");
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(images.size()));
    if (threads == 1) return detail::calibrate_range(g, images);

    std::vector<CalibrationStats> partial(threads);
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (images.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t begin = std::min(images.size(), t * chunk);
            const std::size_t end = std::min(images.size(), begin + chunk);
            pool.emplace_back([&, t, begin, end] {
                try {
                    partial[t] = detail::calibrate_range(g, images.subspan(begin, end - begin));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    CalibrationStats total;
    for (const auto& p : partial) total.merge(p);
    return total;
}

namespace detail {

inline std::pair<double, double> value_range(std::span<const float> v) {
    if (v.empty()) return {0.0, 0.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

} // namespace detail

/// int8 twin of a float graph. Weights take per-tensor parameters from
/// their own range, biases become int32 at in_scale * w_scale, and every
/// activation takes compute_qparams() of its calibrated range. Layers,
/// edges, shapes and tensor ids are unchanged.
inline ModelGraph quantize_model(const ModelGraph& g, const CalibrationStats& stats) {
    if (g.is_quantized()) throw QuantizeError("graph is already quantized");
    for (const auto& t : g.tensors)
        if (t.dtype != DType::float32)
            throw QuantizeError("tensor " + std::to_string(t.id) + " is " + dtype_name(t.dtype) + ", expected float32");
    ModelGraph q = g;

    std::map<TensorId, QuantParams> qp;
    for (const auto& t : g.tensors) {
        if (t.is_constant()) {
            auto [lo, hi] = detail::value_range(std::get<std::vector<float>>(*t.constant));
            qp[t.id] = compute_qparams(lo, hi);
            continue;
        }
        auto s = stats.tensors.find(t.id);
        if (s == stats.tensors.end() || s->second.count == 0)
            throw QuantizeError("no calibration stats for tensor " + std::to_string(t.id));
        if (!(s->second.min <= s->second.max))
            throw QuantizeError("calibration range of tensor " + std::to_string(t.id) + " is empty");
        qp[t.id] = compute_qparams(s->second.min, s->second.max);
    }

    // Bias scale depends on the consuming layer; a bias shared by layers
    // that disagree on it cannot be represented.
    std::map<TensorId, double> bias_scale;
    for (const auto& l : g.layers) {
        if (l.kind != LayerKind::conv2d && l.kind != LayerKind::depthwise_conv2d &&
            l.kind != LayerKind::fully_connected)
            continue;
        const double s = qp.at(l.inputs[0]).scale * qp.at(l.inputs[1]).scale;
        auto [it, fresh] = bias_scale.emplace(l.inputs[2], s);
        if (!fresh && it->second != s)
            throw QuantizeError("bias tensor " + std::to_string(l.inputs[2]) + " is shared with conflicting scales");
    }

    for (auto& t : q.tensors) {
        if (auto b = bias_scale.find(t.id); b != bias_scale.end()) {
            const QuantParams bq{b->second, 0};
            const auto& src = std::get<std::vector<float>>(*t.constant);
            std::vector<std::int32_t> v(src.size());
            for (std::size_t i = 0; i < src.size(); ++i)
                v[i] = saturate_int32(static_cast<std::int64_t>(
                    std::clamp(round_half_away(src[i] / bq.scale), -9.2e18, 9.2e18)));
            t.dtype = DType::int32;
            t.qparams = bq;
            t.constant = std::move(v);
            continue;
        }
        const auto p = qp.at(t.id);
        t.dtype = DType::int8;
        t.qparams = p;
        if (t.constant) {
            const auto& src = std::get<std::vector<float>>(*t.constant);
            std::vector<std::int8_t> v(src.size());
            for (std::size_t i = 0; i < src.size(); ++i) v[i] = quantize_value(src[i], p);
            t.constant = std::move(v);
        }
    }
    finalize(q);
    return q;
}

} // namespace rockhunt
