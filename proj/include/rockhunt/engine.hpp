// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstring>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <unordered_map>
#include <vector>

#include "rockhunt/arena.hpp"
#include "rockhunt/fixed_point.hpp"
#include "rockhunt/graph.hpp"
#include "rockhunt/kernels.hpp"

namespace rockhunt {

struct LayerTiming {
    std::size_t layer = 0; // index into ModelGraph::layers
    TensorId output = 0;
    Shape shape;
    double ms = 0.0;
};

/// Per-layer record of one execution, in the order layers ran.
struct ExecutionTrace {
    std::vector<LayerTiming> layers;
    double total_ms = 0.0;

    /// Trace equality ignoring wall-times.
    bool same_schedule(const ExecutionTrace& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].layer != o.layers[i].layer || layers[i].output != o.layers[i].output ||
                layers[i].shape != o.layers[i].shape)
                return false;
        return true;
    }
};

struct RunOptions {
    /// int8 graphs only: run each layer as dequantize -> float kernel ->
    /// quantize instead of the integer recipe. For diffing.
    bool float_reference = false;
    /// Called with every graph input and every layer output once produced.
    std::function<void(TensorId, const Tensor&)> observer;
};

struct RunResult {
    std::vector<Tensor> outputs;
    ExecutionTrace trace;
};

namespace detail {

class AlignedBuffer {
public:
    static constexpr std::size_t kAlign = 64;

    explicit AlignedBuffer(std::size_t bytes)
        : size_(bytes), data_(static_cast<std::byte*>(::operator new(std::max<std::size_t>(bytes, 1), std::align_val_t{kAlign}))) {
        std::memset(data_.get(), 0, std::max<std::size_t>(bytes, 1));
    }

    std::byte* data() noexcept { return data_.get(); }
    std::size_t size() const noexcept { return size_; }

private:
    struct Free {
        void operator()(std::byte* p) const noexcept { ::operator delete(p, std::align_val_t{kAlign}); }
    };
    std::size_t size_;
    std::unique_ptr<std::byte, Free> data_;
};

} // namespace detail

/// Executes a finalized graph. Activations live in one scratch arena laid
/// out by plan_arena(); constants are read in place from the graph, which
/// must outlive the interpreter. One interpreter runs one inference at a
/// time; use one per thread for concurrent inference.
class Interpreter {
public:
    explicit Interpreter(const ModelGraph& g, std::size_t alignment = kArenaAlignment)
        : g_(g), plan_(plan_arena(g, alignment)), arena_(plan_.peak_bytes) {
        if (g.order.size() != g.layers.size()) throw ArgumentError("graph is not finalized");
        for (std::size_t i = 0; i < g.tensors.size(); ++i) index_[g.tensors[i].id] = i;
        prepared_.resize(g.layers.size());
        for (auto li : g.order) prepare(li);
    }

    Interpreter(const Interpreter&) = delete;
    Interpreter& operator=(const Interpreter&) = delete;

    const ArenaPlan& plan() const noexcept { return plan_; }

    RunResult invoke(const Tensor& input, const RunOptions& opts = {}) { return invoke(std::span(&input, 1), opts); }

    RunResult invoke(std::span<const Tensor> inputs, const RunOptions& opts = {}) {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        if (inputs.size() != g_.inputs.size())
            throw ArgumentError("graph takes " + std::to_string(g_.inputs.size()) + " inputs, got " +
                                std::to_string(inputs.size()));
        for (std::size_t i = 0; i < inputs.size(); ++i) load_input(g_.inputs[i], inputs[i], opts);

        RunResult result;
        result.trace.layers.reserve(g_.order.size());
        for (auto li : g_.order) {
            const auto l0 = clock::now();
            const auto& layer = g_.layers[li];
            const auto& out = decl(layer.output);
            if (out.dtype == DType::float32) exec_float_graph(li);
            else if (opts.float_reference) exec_reference(li);
            else exec_int8(li);
            const auto l1 = clock::now();
            result.trace.layers.push_back(
                {li, layer.output, out.shape, std::chrono::duration<double, std::milli>(l1 - l0).count()});
            if (opts.observer) opts.observer(layer.output, snapshot(layer.output));
        }
        for (auto id : g_.outputs) result.outputs.push_back(snapshot(id));
        result.trace.total_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        return result;
    }

private:
    struct Prepared {
        kernels::ConvGeometry geom;
        kernels::QuantizedLayerParams q;
        kernels::Rescale rescale;
        std::vector<kernels::Rescale> input_rescales;
        std::vector<QuantizedMultiplier> pool_multipliers;
        std::vector<std::uint32_t> exp_table;
        QuantizedMultiplier prob_multiplier;
        kernels::QuantizedAddParams add;
        std::size_t depth = 0;   // softmax row length
        std::size_t outer = 0;   // concat: blocks before the axis
        std::size_t inner = 0;   // concat: elements after the axis
    };

    const TensorDecl& decl(TensorId id) const { return g_.tensors[index_.at(id)]; }

    template <class T>
    std::span<T> arena_span(TensorId id) {
        const auto& d = decl(id);
        auto* p = reinterpret_cast<T*>(arena_.data() + plan_.offsets.at(id));
        return {p, static_cast<std::size_t>(element_count(d.shape))};
    }

    template <class T>
    std::span<const T> view(TensorId id) {
        const auto& d = decl(id);
        if (d.is_constant()) return std::get<std::vector<T>>(*d.constant);
        return arena_span<T>(id);
    }

    Tensor snapshot(TensorId id) {
        const auto& d = decl(id);
        switch (d.dtype) {
        case DType::float32: {
            auto s = view<float>(id);
            return Tensor(d.shape, std::vector<float>(s.begin(), s.end()));
        }
        case DType::int8: {
            auto s = view<std::int8_t>(id);
            return Tensor(d.shape, std::vector<std::int8_t>(s.begin(), s.end()), *d.qparams);
        }
        case DType::int32: {
            auto s = view<std::int32_t>(id);
            return Tensor(d.shape, std::vector<std::int32_t>(s.begin(), s.end()), d.qparams);
        }
        }
        throw DTypeError("unknown dtype");
    }

    void load_input(TensorId id, const Tensor& t, const RunOptions& opts) {
        const auto& d = decl(id);
        if (t.shape() != d.shape)
            throw ShapeError("input " + std::to_string(id) + " expects " + shape_str(d.shape) + ", got " +
                             shape_str(t.shape()));
        if (t.dtype() != d.dtype)
            throw DTypeError(std::string("input expects ") + dtype_name(d.dtype) + ", got " + dtype_name(t.dtype()));
        if (d.dtype == DType::int8 && t.qparams() != d.qparams)
            throw DTypeError("int8 input must use the graph's input quantization parameters");
        std::visit(
            [&](const auto& v) {
                using T = typename std::decay_t<decltype(v)>::value_type;
                auto dst = arena_span<T>(id);
                std::copy(v.begin(), v.end(), dst.begin());
            },
            t.buffer());
        if (opts.observer) opts.observer(id, t);
    }

    kernels::ConvGeometry geometry(const LayerSpec& l) const {
        const auto& x = decl(l.inputs[0]).shape;
        const auto& y = decl(l.output).shape;
        auto g = kernels::make_geometry(x[1], x[2], x[3], y[3], l.attr(AttrKey::kernel_h), l.attr(AttrKey::kernel_w),
                                        l.attr(AttrKey::stride_h), l.attr(AttrKey::stride_w), l.padding());
        return g;
    }

    void prepare(std::size_t li) {
        const auto& l = g_.layers[li];
        auto& p = prepared_[li];
        const auto& out = decl(l.output);
        switch (l.kind) {
        case LayerKind::conv2d:
        case LayerKind::depthwise_conv2d:
        case LayerKind::max_pool:
        case LayerKind::avg_pool: p.geom = geometry(l); break;
        case LayerKind::softmax: p.depth = static_cast<std::size_t>(out.shape.back()); break;
        case LayerKind::concat: {
            const auto axis = static_cast<std::size_t>(l.attr(AttrKey::axis));
            p.outer = 1;
            p.inner = 1;
            for (std::size_t d = 0; d < axis; ++d) p.outer *= static_cast<std::size_t>(out.shape[d]);
            for (std::size_t d = axis + 1; d < out.shape.size(); ++d) p.inner *= static_cast<std::size_t>(out.shape[d]);
            break;
        }
        default: break;
        }
        if (out.dtype != DType::int8) return;

        const auto& oq = *out.qparams;
        const auto& xq = *decl(l.inputs[0]).qparams;
        switch (l.kind) {
        case LayerKind::conv2d:
        case LayerKind::depthwise_conv2d:
        case LayerKind::fully_connected: {
            const auto& wq = *decl(l.inputs[1]).qparams;
            p.q.input_zero_point = xq.zero_point;
            p.q.weight_zero_point = wq.zero_point;
            p.q.output_zero_point = oq.zero_point;
            p.q.multiplier = quantize_multiplier(xq.scale * wq.scale / oq.scale);
            std::tie(p.q.act_min, p.q.act_max) = kernels::quantized_activation_range(l.activation(), oq);
            break;
        }
        case LayerKind::max_pool:
        case LayerKind::reshape: p.rescale = kernels::Rescale::between(xq, oq); break;
        case LayerKind::relu6:
            p.rescale = kernels::Rescale::between(xq, oq);
            std::tie(p.rescale.act_min, p.rescale.act_max) = kernels::quantized_activation_range(Activation::relu6, oq);
            break;
        case LayerKind::avg_pool:
            p.pool_multipliers = kernels::avg_pool_multipliers(xq, oq, p.geom.kernel_h * p.geom.kernel_w);
            break;
        case LayerKind::softmax:
            p.exp_table = kernels::softmax_exp_table(xq.scale);
            p.prob_multiplier = quantize_multiplier(std::ldexp(1.0, -kernels::kSoftmaxProbBits) / oq.scale);
            break;
        case LayerKind::add: {
            const auto& bq = *decl(l.inputs[1]).qparams;
            p.add.a_zero_point = xq.zero_point;
            p.add.b_zero_point = bq.zero_point;
            p.add.out_zero_point = oq.zero_point;
            p.add.a_multiplier = quantize_multiplier(xq.scale / oq.scale);
            p.add.b_multiplier = quantize_multiplier(bq.scale / oq.scale);
            std::tie(p.add.act_min, p.add.act_max) = kernels::quantized_activation_range(l.activation(), oq);
            break;
        }
        case LayerKind::concat:
            for (auto id : l.inputs) p.input_rescales.push_back(kernels::Rescale::between(*decl(id).qparams, oq));
            break;
        }
    }

    /// Float kernels on arbitrary float views; shared by float graphs and
    /// the int8 reference path.
    void exec_float(std::size_t li, const std::vector<std::span<const float>>& in, std::span<float> out) {
        const auto& l = g_.layers[li];
        const auto& p = prepared_[li];
        switch (l.kind) {
        case LayerKind::conv2d: kernels::conv2d(in[0], in[1], in[2], out, p.geom, l.activation()); break;
        case LayerKind::depthwise_conv2d:
            kernels::depthwise_conv2d(in[0], in[1], in[2], out, p.geom, l.activation());
            break;
        case LayerKind::fully_connected: kernels::fully_connected(in[0], in[1], in[2], out, l.activation()); break;
        case LayerKind::max_pool: kernels::max_pool(in[0], out, p.geom); break;
        case LayerKind::avg_pool: kernels::avg_pool(in[0], out, p.geom); break;
        case LayerKind::relu6: kernels::relu6(in[0], out); break;
        case LayerKind::softmax: kernels::softmax(in[0], out, p.depth); break;
        case LayerKind::add: kernels::add(in[0], in[1], out, l.activation()); break;
        case LayerKind::reshape: std::copy(in[0].begin(), in[0].end(), out.begin()); break;
        case LayerKind::concat: {
            const std::size_t out_block = out.size() / p.outer;
            std::size_t offset = 0;
            for (const auto& s : in) {
                const std::size_t block = s.size() / p.outer;
                kernels::concat_slice<float>(s, out, p.outer, block, out_block, offset, [](float v) { return v; });
                offset += block;
            }
            break;
        }
        }
    }

    void exec_float_graph(std::size_t li) {
        const auto& l = g_.layers[li];
        std::vector<std::span<const float>> in;
        for (auto id : l.inputs) in.push_back(view<float>(id));
        exec_float(li, in, arena_span<float>(l.output));
    }

    std::vector<float> dequantized(TensorId id, std::optional<QuantParams> fallback) {
        const auto& d = decl(id);
        std::vector<float> v;
        if (d.dtype == DType::int8) {
            for (auto q : view<std::int8_t>(id)) v.push_back(dequantize_value(q, *d.qparams));
        } else {
            const auto qp = d.qparams ? *d.qparams : fallback.value_or(QuantParams{});
            for (auto q : view<std::int32_t>(id)) v.push_back(static_cast<float>(qp.scale * (double(q) - qp.zero_point)));
        }
        return v;
    }

    void exec_reference(std::size_t li) {
        const auto& l = g_.layers[li];
        std::optional<QuantParams> bias_qp;
        if (l.inputs.size() == 3 && decl(l.inputs[1]).qparams && decl(l.inputs[0]).qparams)
            bias_qp = QuantParams{decl(l.inputs[0]).qparams->scale * decl(l.inputs[1]).qparams->scale, 0};
        std::vector<std::vector<float>> storage;
        for (auto id : l.inputs) storage.push_back(dequantized(id, bias_qp));
        std::vector<std::span<const float>> in(storage.begin(), storage.end());
        std::vector<float> result(static_cast<std::size_t>(element_count(decl(l.output).shape)));
        exec_float(li, in, result);
        const auto& oq = *decl(l.output).qparams;
        auto dst = arena_span<std::int8_t>(l.output);
        for (std::size_t i = 0; i < result.size(); ++i) dst[i] = quantize_value(result[i], oq);
    }

    void exec_int8(std::size_t li) {
        const auto& l = g_.layers[li];
        const auto& p = prepared_[li];
        auto out = arena_span<std::int8_t>(l.output);
        auto x = view<std::int8_t>(l.inputs[0]);
        switch (l.kind) {
        case LayerKind::conv2d:
            kernels::conv2d(x, view<std::int8_t>(l.inputs[1]), view<std::int32_t>(l.inputs[2]), out, p.geom, p.q);
            break;
        case LayerKind::depthwise_conv2d:
            kernels::depthwise_conv2d(x, view<std::int8_t>(l.inputs[1]), view<std::int32_t>(l.inputs[2]), out, p.geom,
                                      p.q);
            break;
        case LayerKind::fully_connected:
            kernels::fully_connected(x, view<std::int8_t>(l.inputs[1]), view<std::int32_t>(l.inputs[2]), out, p.q);
            break;
        case LayerKind::max_pool: kernels::max_pool(x, out, p.geom, p.rescale); break;
        case LayerKind::avg_pool: {
            const auto& xq = *decl(l.inputs[0]).qparams;
            const auto& oq = *decl(l.output).qparams;
            kernels::avg_pool(x, out, p.geom, xq.zero_point, oq.zero_point, p.pool_multipliers);
            break;
        }
        case LayerKind::relu6: kernels::relu6(x, out, p.rescale); break;
        case LayerKind::softmax:
            kernels::softmax(x, out, p.depth, p.exp_table, p.prob_multiplier, decl(l.output).qparams->zero_point);
            break;
        case LayerKind::add: kernels::add(x, view<std::int8_t>(l.inputs[1]), out, p.add); break;
        case LayerKind::reshape: kernels::rescale(x, out, p.rescale); break;
        case LayerKind::concat: {
            const std::size_t out_block = out.size() / p.outer;
            std::size_t offset = 0;
            for (std::size_t k = 0; k < l.inputs.size(); ++k) {
                auto s = view<std::int8_t>(l.inputs[k]);
                const std::size_t block = s.size() / p.outer;
                kernels::concat_slice<std::int8_t>(s, out, p.outer, block, out_block, offset, p.input_rescales[k]);
                offset += block;
            }
            break;
        }
        }
    }

    const ModelGraph& g_;
    ArenaPlan plan_;
    detail::AlignedBuffer arena_;
    std::unordered_map<TensorId, std::size_t> index_;
    std::vector<Prepared> prepared_;
};

/// One-shot execution of a single-input graph.
inline RunResult run(const ModelGraph& g, const Tensor& input, const RunOptions& opts = {}) {
    Interpreter interp(g);
    return interp.invoke(input, opts);
}

/// Brings a float image tensor into the form the graph's first input
/// expects: unchanged for float graphs, quantized with the declared
/// parameters for int8 graphs.
inline Tensor prepare_input(const ModelGraph& g, const Tensor& image) {
    const auto& d = g.tensor(g.inputs.at(0));
    Tensor t = image.shape() == d.shape ? image : image.reshaped(d.shape);
    if (d.dtype == DType::int8) return quantize(t, *d.qparams);
    return t;
}

/// Output values as floats (dequantized for int8 outputs).
inline std::vector<float> output_values(const Tensor& t) {
    if (t.dtype() == DType::int8) {
        auto d = dequantize(t);
        auto s = d.data<float>();
        return {s.begin(), s.end()};
    }
    auto s = t.data<float>();
    return {s.begin(), s.end()};
}

} // namespace rockhunt
