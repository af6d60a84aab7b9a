// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rockhunt/error.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {

using TensorId = std::int32_t;

inline constexpr std::uint32_t kFormatVersion = 1;

/// Upper bound on elements per tensor; keeps shape arithmetic in range and
/// rejects absurd allocations coming from corrupted files.
inline constexpr std::int64_t kMaxTensorElements = std::int64_t{1} << 28;
inline constexpr std::size_t kMaxRank = 8;

enum class LayerKind : std::uint8_t {
    conv2d = 0,
    depthwise_conv2d = 1,
    fully_connected = 2,
    max_pool = 3,
    avg_pool = 4,
    relu6 = 5,
    softmax = 6,
    add = 7,
    concat = 8,
    reshape = 9,
};
inline constexpr std::uint8_t kLayerKindCount = 10;

inline constexpr const char* layer_kind_name(LayerKind k) noexcept {
    switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise_conv2d: return "depthwise_conv2d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::avg_pool: return "avg_pool";
    case LayerKind::relu6: return "relu6";
    case LayerKind::softmax: return "softmax";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    case LayerKind::reshape: return "reshape";
    }
    return "?";
}

enum class AttrKey : std::uint8_t {
    kernel_h = 1,
    kernel_w = 2,
    stride_h = 3,
    stride_w = 4,
    padding = 5,
    activation = 6,
    axis = 7,
};
inline constexpr std::uint8_t kMaxAttrKey = 7;

enum class Padding : std::int32_t { valid = 0, same = 1 };
enum class Activation : std::int32_t { none = 0, relu6 = 1 };

inline std::vector<AttrKey> required_attrs(LayerKind kind) {
    using enum AttrKey;
    switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d: return {kernel_h, kernel_w, stride_h, stride_w, padding, activation};
    case LayerKind::max_pool:
    case LayerKind::avg_pool: return {kernel_h, kernel_w, stride_h, stride_w, padding};
    case LayerKind::fully_connected:
    case LayerKind::add: return {activation};
    case LayerKind::concat: return {axis};
    case LayerKind::relu6:
    case LayerKind::softmax:
    case LayerKind::reshape: return {};
    }
    return {};
}

enum class ModelErrc {
    bad_magic,
    unsupported_version,
    truncated_payload,
    trailing_bytes,
    invalid_field,
    duplicate_tensor,
    dangling_reference,
    producer_conflict,
    cyclic_graph,
    shape_mismatch,
    dtype_mismatch,
    invalid_attribute,
};

inline const char* model_errc_name(ModelErrc c) noexcept {
    switch (c) {
    case ModelErrc::bad_magic: return "bad magic";
    case ModelErrc::unsupported_version: return "unsupported version";
    case ModelErrc::truncated_payload: return "truncated payload";
    case ModelErrc::trailing_bytes: return "trailing bytes";
    case ModelErrc::invalid_field: return "invalid field";
    case ModelErrc::duplicate_tensor: return "duplicate tensor";
    case ModelErrc::dangling_reference: return "dangling reference";
    case ModelErrc::producer_conflict: return "producer conflict";
    case ModelErrc::cyclic_graph: return "cyclic graph";
    case ModelErrc::shape_mismatch: return "shape mismatch";
    case ModelErrc::dtype_mismatch: return "dtype mismatch";
    case ModelErrc::invalid_attribute: return "invalid attribute";
    }
    return "?";
}

/// Where in a graph a validation problem sits. Layer indices refer to the
/// stored layer table, not the topological order.
struct ModelErrorSite {
    std::optional<std::size_t> layer;
    std::optional<std::size_t> tensor_index;
    std::optional<TensorId> tensor_id;
};

/// Typed model failure; parse errors also carry the byte offset at which the
/// offending record starts.
class ModelError : public Error {
public:
    ModelError(ModelErrc code, const std::string& detail, ModelErrorSite site = {},
               std::optional<std::size_t> offset = std::nullopt)
        : Error(compose(code, detail, offset)), code_(code), detail_(detail), site_(site), offset_(offset) {}

    ModelErrc code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    const ModelErrorSite& site() const noexcept { return site_; }
    std::optional<std::size_t> offset() const noexcept { return offset_; }

    ModelError at_offset(std::size_t offset) const { return ModelError(code_, detail_, site_, offset); }

private:
    static std::string compose(ModelErrc code, const std::string& detail, std::optional<std::size_t> offset) {
        std::string s = model_errc_name(code);
        if (offset) s += " at byte " + std::to_string(*offset);
        return s + ": " + detail;
    }

    ModelErrc code_;
    std::string detail_;
    ModelErrorSite site_;
    std::optional<std::size_t> offset_;
};

struct TensorDecl {
    TensorId id = 0;
    DType dtype = DType::float32;
    Shape shape;
    std::optional<QuantParams> qparams;
    std::optional<Buffer> constant;

    bool is_constant() const noexcept { return constant.has_value(); }
    std::int64_t byte_size() const { return element_count(shape) * static_cast<std::int64_t>(dtype_size(dtype)); }

    Tensor value() const { return Tensor(shape, *constant, qparams); }

    bool operator==(const TensorDecl&) const = default;
};

struct LayerSpec {
    LayerKind kind = LayerKind::reshape;
    std::vector<TensorId> inputs;
    TensorId output = 0;
    std::map<AttrKey, std::int32_t> attrs;

    std::int32_t attr(AttrKey k) const {
        auto it = attrs.find(k);
        if (it == attrs.end()) throw ModelError(ModelErrc::invalid_attribute, "missing attribute");
        return it->second;
    }
    Padding padding() const { return static_cast<Padding>(attr(AttrKey::padding)); }
    Activation activation() const { return static_cast<Activation>(attr(AttrKey::activation)); }

    bool operator==(const LayerSpec&) const = default;
};

/// A parsed CNN: tensor table, layer table, graph inputs/outputs. `order`
/// holds the topological execution order and is filled by finalize().
struct ModelGraph {
    std::uint32_t version = kFormatVersion;
    std::vector<TensorDecl> tensors;
    std::vector<LayerSpec> layers;
    std::vector<TensorId> inputs;
    std::vector<TensorId> outputs;
    std::vector<std::size_t> order;

    std::optional<std::size_t> find(TensorId id) const {
        for (std::size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].id == id) return i;
        return std::nullopt;
    }

    const TensorDecl& tensor(TensorId id) const {
        auto i = find(id);
        if (!i) throw ModelError(ModelErrc::dangling_reference, "unknown tensor id " + std::to_string(id));
        return tensors[*i];
    }
    TensorDecl& tensor(TensorId id) {
        auto i = find(id);
        if (!i) throw ModelError(ModelErrc::dangling_reference, "unknown tensor id " + std::to_string(id));
        return tensors[*i];
    }

    /// True when the activations are int8 (the quantizer's output).
    bool is_quantized() const {
        for (const auto& t : tensors)
            if (!t.is_constant() && t.dtype == DType::int8) return true;
        return false;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : tensors)
            if (t.is_constant()) n += static_cast<std::size_t>(element_count(t.shape));
        return n;
    }

    bool operator==(const ModelGraph& o) const {
        return version == o.version && tensors == o.tensors && layers == o.layers && inputs == o.inputs &&
               outputs == o.outputs;
    }
};

/// Spatial output extent for one axis. "same" gives ceil(in / stride) and
/// pads symmetrically, with the odd pixel on the high side.
inline std::int32_t conv_output_extent(std::int32_t in, std::int32_t kernel, std::int32_t stride, Padding pad) {
    if (pad == Padding::same) return (in + stride - 1) / stride;
    if (in < kernel) return 0;
    return (in - kernel) / stride + 1;
}

/// Zero padding inserted before the first row/column for "same" padding.
inline std::int32_t conv_pad_before(std::int32_t in, std::int32_t kernel, std::int32_t stride, Padding pad) {
    if (pad == Padding::valid) return 0;
    const std::int32_t out = conv_output_extent(in, kernel, stride, pad);
    const std::int32_t total = std::max((out - 1) * stride + kernel - in, 0);
    return total / 2;
}

namespace detail {

inline std::size_t expected_input_count(LayerKind kind, std::size_t given) {
    switch (kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise_conv2d:
    case LayerKind::fully_connected: return 3;
    case LayerKind::add: return 2;
    case LayerKind::concat: return given >= 1 ? given : 1;
    default: return 1;
    }
}

class Finalizer {
public:
    Finalizer(ModelGraph& g, bool infer_missing) : g_(g), infer_(infer_missing) {}

    void run() {
        check_tensors();
        check_io();
        check_layers();
        topo_sort();
        infer_shapes();
    }

private:
    [[noreturn]] void fail(ModelErrc c, const std::string& msg, ModelErrorSite site = {}) {
        throw ModelError(c, msg, site);
    }

    std::size_t index_of(TensorId id, ModelErrorSite site) {
        auto it = index_.find(id);
        if (it == index_.end()) {
            site.tensor_id = id;
            fail(ModelErrc::dangling_reference, "reference to undeclared tensor id " + std::to_string(id), site);
        }
        return it->second;
    }

    void check_tensors() {
        for (std::size_t i = 0; i < g_.tensors.size(); ++i) {
            const auto& t = g_.tensors[i];
            ModelErrorSite site{std::nullopt, i, t.id};
            if (!index_.emplace(t.id, i).second)
                fail(ModelErrc::duplicate_tensor, "tensor id " + std::to_string(t.id) + " declared twice", site);
            if (static_cast<std::uint8_t>(t.dtype) > 2) fail(ModelErrc::invalid_field, "unknown dtype", site);
            if (t.shape.size() > kMaxRank) fail(ModelErrc::invalid_field, "rank exceeds limit", site);
            std::int64_t n = 1;
            for (auto d : t.shape) {
                if (d < 1) fail(ModelErrc::invalid_field, "non-positive extent", site);
                n *= d;
                if (n > kMaxTensorElements) fail(ModelErrc::invalid_field, "tensor too large", site);
            }
            if (t.shape.empty() && (t.is_constant() || !infer_))
                fail(ModelErrc::invalid_field, "tensor " + std::to_string(t.id) + " has no shape", site);
            switch (t.dtype) {
            case DType::float32:
                if (t.qparams) fail(ModelErrc::invalid_field, "float32 tensor with quantization parameters", site);
                break;
            case DType::int8:
                if (!t.qparams) fail(ModelErrc::invalid_field, "int8 tensor without quantization parameters", site);
                break;
            case DType::int32: break;
            }
            if (t.qparams) {
                try {
                    validate_qparams(*t.qparams, t.dtype);
                } catch (const InvalidRangeError& e) {
                    fail(ModelErrc::invalid_field, e.what(), site);
                }
            }
            if (t.constant) {
                if (buffer_dtype(*t.constant) != t.dtype)
                    fail(ModelErrc::dtype_mismatch, "constant payload dtype differs from declaration", site);
                if (static_cast<std::int64_t>(buffer_size(*t.constant)) != element_count(t.shape))
                    fail(ModelErrc::shape_mismatch, "constant payload size differs from shape", site);
            }
        }
    }

    void check_io() {
        for (auto id : g_.inputs) {
            auto i = index_of(id, {});
            if (g_.tensors[i].is_constant())
                fail(ModelErrc::invalid_field, "graph input " + std::to_string(id) + " is a constant", {{}, i, id});
            if (g_.tensors[i].shape.empty())
                fail(ModelErrc::invalid_field, "graph input " + std::to_string(id) + " has no shape", {{}, i, id});
        }
        for (auto id : g_.outputs) index_of(id, {});
    }

    void check_layers() {
        producer_.assign(g_.tensors.size(), -1);
        for (auto id : g_.inputs) producer_[index_.at(id)] = -2; // produced "before" layer 0
        for (std::size_t li = 0; li < g_.layers.size(); ++li) {
            const auto& l = g_.layers[li];
            ModelErrorSite site{li, std::nullopt, std::nullopt};
            if (static_cast<std::uint8_t>(l.kind) >= kLayerKindCount) fail(ModelErrc::invalid_field, "unknown layer kind", site);
            if (l.inputs.empty() || l.inputs.size() != expected_input_count(l.kind, l.inputs.size()))
                fail(ModelErrc::invalid_field,
                     std::string(layer_kind_name(l.kind)) + " takes " +
                         std::to_string(expected_input_count(l.kind, l.inputs.size())) + " inputs",
                     site);
            for (auto id : l.inputs) index_of(id, site);
            const auto oi = index_of(l.output, site);
            if (g_.tensors[oi].is_constant())
                fail(ModelErrc::producer_conflict, "layer writes constant tensor " + std::to_string(l.output), site);
            if (producer_[oi] != -1)
                fail(ModelErrc::producer_conflict, "tensor " + std::to_string(l.output) + " has more than one producer",
                     site);
            producer_[oi] = static_cast<std::int64_t>(li);

            auto req = required_attrs(l.kind);
            if (l.attrs.size() != req.size())
                fail(ModelErrc::invalid_attribute,
                     std::string(layer_kind_name(l.kind)) + " attribute set mismatch", site);
            for (auto k : req)
                if (!l.attrs.count(k))
                    fail(ModelErrc::invalid_attribute, std::string(layer_kind_name(l.kind)) + " attribute set mismatch",
                         site);
            for (auto [k, v] : l.attrs) {
                switch (k) {
                case AttrKey::kernel_h:
                case AttrKey::kernel_w:
                case AttrKey::stride_h:
                case AttrKey::stride_w:
                    if (v < 1) fail(ModelErrc::invalid_attribute, "kernel and stride must be >= 1", site);
                    break;
                case AttrKey::padding:
                case AttrKey::activation:
                    if (v != 0 && v != 1) fail(ModelErrc::invalid_attribute, "enum attribute out of range", site);
                    break;
                case AttrKey::axis:
                    if (v < 0) fail(ModelErrc::invalid_attribute, "negative axis", site);
                    break;
                }
            }
        }
        for (std::size_t i = 0; i < g_.tensors.size(); ++i) {
            const auto& t = g_.tensors[i];
            if (!t.is_constant() && producer_[i] == -1)
                fail(ModelErrc::dangling_reference, "tensor " + std::to_string(t.id) + " is never produced",
                     {{}, i, t.id});
        }
    }

    void topo_sort() {
        const auto n = g_.layers.size();
        std::vector<std::size_t> pending(n, 0);
        std::vector<std::vector<std::size_t>> consumers(n);
        for (std::size_t li = 0; li < n; ++li) {
            for (auto id : g_.layers[li].inputs) {
                const auto p = producer_[index_.at(id)];
                if (p >= 0) {
                    ++pending[li];
                    consumers[static_cast<std::size_t>(p)].push_back(li);
                }
            }
        }
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t li = 0; li < n; ++li)
            if (pending[li] == 0) ready.push(li);
        g_.order.clear();
        while (!ready.empty()) {
            auto li = ready.top();
            ready.pop();
            g_.order.push_back(li);
            for (auto c : consumers[li])
                if (--pending[c] == 0) ready.push(c);
        }
        if (g_.order.size() != n) {
            std::size_t stuck = 0;
            while (pending[stuck] == 0) ++stuck;
            fail(ModelErrc::cyclic_graph, "layer dependency cycle through layer " + std::to_string(stuck),
                 {stuck, std::nullopt, std::nullopt});
        }
    }

    TensorDecl& t(TensorId id) { return g_.tensors[index_.at(id)]; }

    void expect_rank(const TensorDecl& d, std::size_t rank, std::size_t li) {
        if (d.shape.size() != rank)
            fail(ModelErrc::shape_mismatch,
                 "tensor " + std::to_string(d.id) + " must have rank " + std::to_string(rank) + ", has " +
                     shape_str(d.shape),
                 {li, std::nullopt, d.id});
    }

    void expect_dtype(const TensorDecl& d, DType want, std::size_t li) {
        if (d.dtype != want)
            fail(ModelErrc::dtype_mismatch,
                 "tensor " + std::to_string(d.id) + " is " + dtype_name(d.dtype) + ", expected " + dtype_name(want),
                 {li, std::nullopt, d.id});
    }

    void expect_constant(const TensorDecl& d, std::size_t li) {
        if (!d.is_constant())
            fail(ModelErrc::invalid_field, "tensor " + std::to_string(d.id) + " must be a constant",
                 {li, std::nullopt, d.id});
    }

    void expect_activation_dtype(const TensorDecl& d, std::size_t li) {
        if (d.dtype != DType::float32 && d.dtype != DType::int8)
            fail(ModelErrc::dtype_mismatch, "activations must be float32 or int8", {li, std::nullopt, d.id});
    }

    void set_output(TensorDecl& out, Shape shape, DType dtype, std::size_t li) {
        for (auto d : shape)
            if (d < 1) fail(ModelErrc::shape_mismatch, "layer produces an empty tensor", {li, std::nullopt, out.id});
        if (element_count(shape) > kMaxTensorElements)
            fail(ModelErrc::shape_mismatch, "layer output too large", {li, std::nullopt, out.id});
        if (out.shape.empty() && infer_) {
            out.shape = std::move(shape);
        } else if (out.shape != shape) {
            fail(ModelErrc::shape_mismatch,
                 "tensor " + std::to_string(out.id) + " declared " + shape_str(out.shape) + ", inferred " +
                     shape_str(shape),
                 {li, std::nullopt, out.id});
        }
        expect_dtype(out, dtype, li);
    }

    void infer_conv(const LayerSpec& l, std::size_t li, bool depthwise) {
        const auto& x = t(l.inputs[0]);
        const auto& w = t(l.inputs[1]);
        const auto& b = t(l.inputs[2]);
        expect_rank(x, 4, li);
        expect_rank(w, 4, li);
        expect_rank(b, 1, li);
        expect_constant(w, li);
        expect_constant(b, li);
        expect_activation_dtype(x, li);
        const bool q = x.dtype == DType::int8;
        expect_dtype(w, x.dtype, li);
        expect_dtype(b, q ? DType::int32 : DType::float32, li);
        const auto kh = l.attr(AttrKey::kernel_h), kw = l.attr(AttrKey::kernel_w);
        const auto sh = l.attr(AttrKey::stride_h), sw = l.attr(AttrKey::stride_w);
        const auto pad = l.padding();
        const std::int32_t cin = x.shape[3];
        const std::int32_t cout = depthwise ? cin : w.shape[0];
        const bool weights_ok = depthwise ? (w.shape[0] == 1 && w.shape[3] == cin)
                                          : (w.shape[3] == cin);
        if (x.shape[0] != 1 || !weights_ok || w.shape[1] != kh || w.shape[2] != kw || b.shape[0] != cout)
            fail(ModelErrc::shape_mismatch,
                 std::string(layer_kind_name(l.kind)) + " operand shapes disagree: x" + shape_str(x.shape) + " w" +
                     shape_str(w.shape) + " b" + shape_str(b.shape),
                 {li, std::nullopt, std::nullopt});
        const auto ho = conv_output_extent(x.shape[1], kh, sh, pad);
        const auto wo = conv_output_extent(x.shape[2], kw, sw, pad);
        set_output(t(l.output), {1, ho, wo, cout}, x.dtype, li);
    }

    void infer_layer(std::size_t li) {
        const auto& l = g_.layers[li];
        switch (l.kind) {
        case LayerKind::conv2d: infer_conv(l, li, false); break;
        case LayerKind::depthwise_conv2d: infer_conv(l, li, true); break;
        case LayerKind::fully_connected: {
            const auto& x = t(l.inputs[0]);
            const auto& w = t(l.inputs[1]);
            const auto& b = t(l.inputs[2]);
            expect_rank(w, 2, li);
            expect_rank(b, 1, li);
            expect_constant(w, li);
            expect_constant(b, li);
            expect_activation_dtype(x, li);
            expect_dtype(w, x.dtype, li);
            expect_dtype(b, x.dtype == DType::int8 ? DType::int32 : DType::float32, li);
            if (x.shape.empty() || x.shape[0] != 1 || element_count(x.shape) != w.shape[1] || b.shape[0] != w.shape[0])
                fail(ModelErrc::shape_mismatch,
                     "fully_connected operand shapes disagree: x" + shape_str(x.shape) + " w" + shape_str(w.shape) +
                         " b" + shape_str(b.shape),
                     {li, std::nullopt, std::nullopt});
            set_output(t(l.output), {1, w.shape[0]}, x.dtype, li);
            break;
        }
        case LayerKind::max_pool:
        case LayerKind::avg_pool: {
            const auto& x = t(l.inputs[0]);
            expect_rank(x, 4, li);
            expect_activation_dtype(x, li);
            if (x.shape[0] != 1)
                fail(ModelErrc::shape_mismatch, "batch must be 1", {li, std::nullopt, x.id});
            const auto pad = l.padding();
            const auto ho = conv_output_extent(x.shape[1], l.attr(AttrKey::kernel_h), l.attr(AttrKey::stride_h), pad);
            const auto wo = conv_output_extent(x.shape[2], l.attr(AttrKey::kernel_w), l.attr(AttrKey::stride_w), pad);
            set_output(t(l.output), {1, ho, wo, x.shape[3]}, x.dtype, li);
            break;
        }
        case LayerKind::relu6:
        case LayerKind::softmax: {
            const auto& x = t(l.inputs[0]);
            expect_activation_dtype(x, li);
            set_output(t(l.output), x.shape, x.dtype, li);
            break;
        }
        case LayerKind::add: {
            const auto& a = t(l.inputs[0]);
            const auto& b = t(l.inputs[1]);
            expect_activation_dtype(a, li);
            expect_dtype(b, a.dtype, li);
            if (a.shape != b.shape)
                fail(ModelErrc::shape_mismatch, "add operands " + shape_str(a.shape) + " and " + shape_str(b.shape),
                     {li, std::nullopt, std::nullopt});
            set_output(t(l.output), a.shape, a.dtype, li);
            break;
        }
        case LayerKind::concat: {
            const auto& first = t(l.inputs[0]);
            expect_activation_dtype(first, li);
            const auto axis = l.attr(AttrKey::axis);
            if (static_cast<std::size_t>(axis) >= first.shape.size())
                fail(ModelErrc::invalid_attribute, "concat axis out of range", {li, std::nullopt, std::nullopt});
            Shape out = first.shape;
            std::int64_t along = 0;
            for (auto id : l.inputs) {
                const auto& x = t(id);
                expect_dtype(x, first.dtype, li);
                bool ok = x.shape.size() == out.size();
                for (std::size_t d = 0; ok && d < out.size(); ++d)
                    if (d != static_cast<std::size_t>(axis) && x.shape[d] != out[d]) ok = false;
                if (!ok)
                    fail(ModelErrc::shape_mismatch, "concat operand " + shape_str(x.shape) + " incompatible",
                         {li, std::nullopt, x.id});
                along += x.shape[static_cast<std::size_t>(axis)];
            }
            if (along > kMaxTensorElements)
                fail(ModelErrc::shape_mismatch, "concat output too large", {li, std::nullopt, std::nullopt});
            out[static_cast<std::size_t>(axis)] = static_cast<std::int32_t>(along);
            set_output(t(l.output), out, first.dtype, li);
            break;
        }
        case LayerKind::reshape: {
            const auto& x = t(l.inputs[0]);
            auto& out = t(l.output);
            expect_activation_dtype(x, li);
            if (out.shape.empty())
                fail(ModelErrc::shape_mismatch, "reshape target shape must be declared", {li, std::nullopt, out.id});
            if (element_count(out.shape) != element_count(x.shape))
                fail(ModelErrc::shape_mismatch, "reshape " + shape_str(x.shape) + " -> " + shape_str(out.shape),
                     {li, std::nullopt, out.id});
            expect_dtype(out, x.dtype, li);
            break;
        }
        }
    }

    void infer_shapes() {
        for (auto li : g_.order) infer_layer(li);
    }

    ModelGraph& g_;
    bool infer_;
    std::unordered_map<TensorId, std::size_t> index_;
    std::vector<std::int64_t> producer_;
};

} // namespace detail

/// Validates `g`, computes its topological order and checks (or, when
/// `infer_missing_shapes` is set, fills in) every layer output shape.
/// Throws ModelError on the first violated invariant.
inline void finalize(ModelGraph& g, bool infer_missing_shapes = false) {
    detail::Finalizer(g, infer_missing_shapes).run();
}

/// Index of the layer producing each tensor id; graph inputs and constants
/// are absent.
inline std::unordered_map<TensorId, std::size_t> producers(const ModelGraph& g) {
    std::unordered_map<TensorId, std::size_t> p;
    for (std::size_t i = 0; i < g.layers.size(); ++i) p[g.layers[i].output] = i;
    return p;
}

struct ConvOptions {
    std::int32_t stride_h = 1;
    std::int32_t stride_w = 1;
    Padding padding = Padding::same;
    Activation activation = Activation::none;
};

struct PoolOptions {
    std::int32_t kernel_h = 2;
    std::int32_t kernel_w = 2;
    std::int32_t stride_h = 2;
    std::int32_t stride_w = 2;
    Padding padding = Padding::valid;
};

/// Incremental construction of float32 graphs (fixtures, tests, tools).
/// Tensor ids are assigned densely from 0 in creation order.
class GraphBuilder {
public:
    TensorId input(Shape shape, DType dtype = DType::float32, std::optional<QuantParams> qp = std::nullopt) {
        auto id = declare(dtype, std::move(shape), qp, std::nullopt);
        g_.inputs.push_back(id);
        return id;
    }

    TensorId constant(const Tensor& value) { return declare(value.dtype(), value.shape(), value.qparams(), value.buffer()); }

    TensorId conv2d(TensorId x, const Tensor& weights, const Tensor& bias, ConvOptions o = {}) {
        return conv_like(LayerKind::conv2d, x, weights, bias, o);
    }

    TensorId depthwise_conv2d(TensorId x, const Tensor& weights, const Tensor& bias, ConvOptions o = {}) {
        return conv_like(LayerKind::depthwise_conv2d, x, weights, bias, o);
    }

    TensorId fully_connected(TensorId x, const Tensor& weights, const Tensor& bias,
                             Activation act = Activation::none) {
        auto w = constant(weights);
        auto b = constant(bias);
        return layer(LayerKind::fully_connected, {x, w, b}, {{AttrKey::activation, static_cast<std::int32_t>(act)}});
    }

    TensorId max_pool(TensorId x, PoolOptions o = {}) { return pool(LayerKind::max_pool, x, o); }
    TensorId avg_pool(TensorId x, PoolOptions o = {}) { return pool(LayerKind::avg_pool, x, o); }
    TensorId relu6(TensorId x) { return layer(LayerKind::relu6, {x}, {}); }
    TensorId softmax(TensorId x) { return layer(LayerKind::softmax, {x}, {}); }

    TensorId add(TensorId a, TensorId b, Activation act = Activation::none) {
        return layer(LayerKind::add, {a, b}, {{AttrKey::activation, static_cast<std::int32_t>(act)}});
    }

    TensorId concat(std::vector<TensorId> xs, std::int32_t axis) {
        return layer(LayerKind::concat, std::move(xs), {{AttrKey::axis, axis}});
    }

    TensorId reshape(TensorId x, Shape shape) { return layer(LayerKind::reshape, {x}, {}, std::move(shape)); }

    void output(TensorId id) { g_.outputs.push_back(id); }

    /// Inferred shape of a tensor declared so far.
    Shape shape_of(TensorId id) const {
        ModelGraph scratch = g_;
        finalize(scratch, true);
        return scratch.tensor(id).shape;
    }

    /// Access to the graph under construction, for fixtures that need to
    /// hand-edit declarations.
    ModelGraph& graph() noexcept { return g_; }

    ModelGraph build() {
        ModelGraph g = g_;
        finalize(g, true);
        return g;
    }

private:
    TensorId declare(DType dtype, Shape shape, std::optional<QuantParams> qp, std::optional<Buffer> payload) {
        TensorDecl d;
        d.id = next_++;
        d.dtype = dtype;
        d.shape = std::move(shape);
        d.qparams = qp;
        d.constant = std::move(payload);
        g_.tensors.push_back(std::move(d));
        return g_.tensors.back().id;
    }

    DType dtype_of_id(TensorId id) const { return g_.tensor(id).dtype; }

    TensorId layer(LayerKind kind, std::vector<TensorId> ins, std::map<AttrKey, std::int32_t> attrs, Shape shape = {}) {
        const DType dt = dtype_of_id(ins.front());
        const auto qp = g_.tensor(ins.front()).qparams;
        auto out = declare(dt, std::move(shape), dt == DType::int8 ? qp : std::nullopt, std::nullopt);
        g_.layers.push_back(LayerSpec{kind, std::move(ins), out, std::move(attrs)});
        return out;
    }

    TensorId conv_like(LayerKind kind, TensorId x, const Tensor& weights, const Tensor& bias, ConvOptions o) {
        if (weights.shape().size() != 4) throw ShapeError("conv weights must be rank 4 (out_c, kh, kw, in_c)");
        auto w = constant(weights);
        auto b = constant(bias);
        return layer(kind, {x, w, b},
                     {{AttrKey::kernel_h, weights.shape()[1]},
                      {AttrKey::kernel_w, weights.shape()[2]},
                      {AttrKey::stride_h, o.stride_h},
                      {AttrKey::stride_w, o.stride_w},
                      {AttrKey::padding, static_cast<std::int32_t>(o.padding)},
                      {AttrKey::activation, static_cast<std::int32_t>(o.activation)}});
    }

    TensorId pool(LayerKind kind, TensorId x, PoolOptions o) {
        return layer(kind, {x},
                     {{AttrKey::kernel_h, o.kernel_h},
                      {AttrKey::kernel_w, o.kernel_w},
                      {AttrKey::stride_h, o.stride_h},
                      {AttrKey::stride_w, o.stride_w},
                      {AttrKey::padding, static_cast<std::int32_t>(o.padding)}});
    }

    ModelGraph g_;
    TensorId next_ = 0;
};

} // namespace rockhunt
