// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// .rglm binary model files.
//
// All integers little-endian, floats IEEE-754 little-endian.
//
//   header (32 bytes)
//     char[4]  magic "RGLM"
//     u32      version (must equal kFormatVersion)
//     u32      tensor count
//     u32      layer count
//     u32      graph input count
//     u32      graph output count
//     u64      payload blob size in bytes
//   tensor record, repeated
//     i32      id
//     u8       dtype (0 float32, 1 int8, 2 int32)
//     u8       rank
//     i32[rank] extents
//     u8       flags (bit 0: quantization parameters follow, bit 1: constant)
//     f64 i32  scale, zero point              (if bit 0)
//     u64 u64  payload offset, payload length (if bit 1)
//   layer record, repeated
//     u8       kind
//     u8       input count, then i32 ids
//     i32      output id
//     u8       attribute count, then (u8 key, i32 value) pairs, keys ascending
//   i32[]      graph input ids, graph output ids
//   u8[]       payload blob: constant tensors back to back in table order
//
// Only the canonical encoding is accepted (payloads contiguous and in table
// order, no unknown flag bits, no trailing bytes), so parse and serialize
// are exact inverses.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "rockhunt/graph.hpp"

namespace rockhunt {

inline constexpr char kModelMagic[4] = {'R', 'G', 'L', 'M'};
inline constexpr std::size_t kHeaderBytes = 32;

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

    void need(std::size_t n) const {
        if (remaining() < n)
            throw ModelError(ModelErrc::truncated_payload,
                             "need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left", {},
                             pos_);
    }
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

inline void write_payload(ByteWriter& w, const Buffer& b) {
    std::visit(
        [&](const auto& v) {
            using T = typename std::decay_t<decltype(v)>::value_type;
            for (T x : v) {
                if constexpr (std::is_same_v<T, float>) w.f32(x);
                else if constexpr (std::is_same_v<T, std::int8_t>) w.u8(static_cast<std::uint8_t>(x));
                else w.i32(x);
            }
        },
        b);
}

inline Buffer read_payload(std::span<const std::uint8_t> bytes, DType t) {
    auto word = [&](std::size_t i) {
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t{bytes[4 * i + k]} << (8 * k);
        return v;
    };
    switch (t) {
    case DType::float32: {
        std::vector<float> v(bytes.size() / 4);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::bit_cast<float>(word(i));
        return v;
    }
    case DType::int8: {
        std::vector<std::int8_t> v(bytes.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(bytes[i]);
        return v;
    }
    case DType::int32: {
        std::vector<std::int32_t> v(bytes.size() / 4);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int32_t>(word(i));
        return v;
    }
    }
    return std::vector<float>{};
}

} // namespace detail

/// Deterministic encoding of a valid graph; parse_model() inverts it.
inline std::vector<std::uint8_t> serialize_model(const ModelGraph& g) {
    detail::ByteWriter w;
    w.bytes(kModelMagic, 4);
    w.u32(g.version);
    w.u32(static_cast<std::uint32_t>(g.tensors.size()));
    w.u32(static_cast<std::uint32_t>(g.layers.size()));
    w.u32(static_cast<std::uint32_t>(g.inputs.size()));
    w.u32(static_cast<std::uint32_t>(g.outputs.size()));
    std::uint64_t payload = 0;
    for (const auto& t : g.tensors)
        if (t.is_constant()) payload += static_cast<std::uint64_t>(t.byte_size());
    w.u64(payload);

    std::uint64_t offset = 0;
    for (const auto& t : g.tensors) {
        w.i32(t.id);
        w.u8(static_cast<std::uint8_t>(t.dtype));
        w.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) w.i32(d);
        w.u8(static_cast<std::uint8_t>((t.qparams ? 1 : 0) | (t.is_constant() ? 2 : 0)));
        if (t.qparams) {
            w.f64(t.qparams->scale);
            w.i32(t.qparams->zero_point);
        }
        if (t.is_constant()) {
            const auto n = static_cast<std::uint64_t>(t.byte_size());
            w.u64(offset);
            w.u64(n);
            offset += n;
        }
    }
    for (const auto& l : g.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.u8(static_cast<std::uint8_t>(l.inputs.size()));
        for (auto id : l.inputs) w.i32(id);
        w.i32(l.output);
        w.u8(static_cast<std::uint8_t>(l.attrs.size()));
        for (auto [k, v] : l.attrs) {
            w.u8(static_cast<std::uint8_t>(k));
            w.i32(v);
        }
    }
    for (auto id : g.inputs) w.i32(id);
    for (auto id : g.outputs) w.i32(id);
    for (const auto& t : g.tensors)
        if (t.is_constant()) detail::write_payload(w, *t.constant);
    return w.take();
}

/// Decodes and validates a model. Every failure is a ModelError carrying
/// the byte offset of the record at fault.
inline ModelGraph parse_model(std::span<const std::uint8_t> bytes) {
    using detail::ByteReader;
    ByteReader r(bytes);
    for (std::size_t i = 0; i < 4; ++i) {
        if (i >= bytes.size()) throw ModelError(ModelErrc::truncated_payload, "file shorter than magic", {}, i);
        if (bytes[i] != static_cast<std::uint8_t>(kModelMagic[i]))
            throw ModelError(ModelErrc::bad_magic, "not an RGLM model", {}, 0);
    }
    r.take(4);
    if (bytes.size() < kHeaderBytes)
        throw ModelError(ModelErrc::truncated_payload, "header is " + std::to_string(kHeaderBytes) + " bytes", {},
                         bytes.size());

    ModelGraph g;
    g.version = r.u32();
    if (g.version != kFormatVersion)
        throw ModelError(ModelErrc::unsupported_version, "version " + std::to_string(g.version), {}, 4);
    const auto tensor_count = r.u32();
    const auto layer_count = r.u32();
    const auto input_count = r.u32();
    const auto output_count = r.u32();
    const auto payload_size = r.u64();

    // Smallest possible records bound the counts before anything is allocated.
    constexpr std::size_t kMinTensorRecord = 7, kMinLayerRecord = 8;
    const auto min_body = std::uint64_t{tensor_count} * kMinTensorRecord + std::uint64_t{layer_count} * kMinLayerRecord +
                          4 * (std::uint64_t{input_count} + output_count);
    if (min_body > r.remaining())
        throw ModelError(ModelErrc::truncated_payload, "declared tables exceed file size", {}, 8);

    struct PayloadRef {
        std::size_t tensor;
        std::uint64_t offset;
        std::uint64_t length;
    };
    std::vector<PayloadRef> payloads;
    std::vector<std::size_t> tensor_offsets, layer_offsets;
    g.tensors.reserve(tensor_count);
    std::uint64_t expected_offset = 0;
    for (std::uint32_t i = 0; i < tensor_count; ++i) {
        const auto at = r.pos();
        tensor_offsets.push_back(at);
        TensorDecl t;
        t.id = r.i32();
        const auto dtype = r.u8();
        if (dtype > 2) throw ModelError(ModelErrc::invalid_field, "unknown dtype " + std::to_string(dtype), {}, at);
        t.dtype = static_cast<DType>(dtype);
        const auto rank = r.u8();
        if (rank > kMaxRank) throw ModelError(ModelErrc::invalid_field, "rank " + std::to_string(rank), {}, at);
        r.need(4u * rank);
        for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.i32());
        const auto flags = r.u8();
        if (flags & ~3u) throw ModelError(ModelErrc::invalid_field, "unknown tensor flags", {}, at);
        if (flags & 1u) {
            QuantParams qp;
            qp.scale = r.f64();
            qp.zero_point = r.i32();
            t.qparams = qp;
        }
        if (flags & 2u) {
            const auto off = r.u64();
            const auto len = r.u64();
            std::int64_t n = 1;
            for (auto d : t.shape) {
                if (d < 1 || (n *= d) > kMaxTensorElements)
                    throw ModelError(ModelErrc::invalid_field, "bad constant shape", {}, at);
            }
            if (off != expected_offset)
                throw ModelError(ModelErrc::invalid_field, "payload offset out of order", {}, at);
            if (len != static_cast<std::uint64_t>(n) * dtype_size(t.dtype))
                throw ModelError(ModelErrc::shape_mismatch, "payload length does not match shape", {}, at);
            if (len > payload_size - std::min(payload_size, off))
                throw ModelError(ModelErrc::truncated_payload, "payload extends past blob", {}, at);
            expected_offset += len;
            payloads.push_back({i, off, len});
        }
        g.tensors.push_back(std::move(t));
    }
    if (expected_offset != payload_size)
        throw ModelError(ModelErrc::invalid_field, "payload blob size does not match tensor table", {}, 24);

    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const auto at = r.pos();
        layer_offsets.push_back(at);
        LayerSpec l;
        const auto kind = r.u8();
        if (kind >= kLayerKindCount)
            throw ModelError(ModelErrc::invalid_field, "unknown layer kind " + std::to_string(kind), {}, at);
        l.kind = static_cast<LayerKind>(kind);
        const auto n_in = r.u8();
        r.need(4u * n_in);
        for (std::uint8_t k = 0; k < n_in; ++k) l.inputs.push_back(r.i32());
        l.output = r.i32();
        const auto n_attr = r.u8();
        int prev_key = 0;
        for (std::uint8_t k = 0; k < n_attr; ++k) {
            const auto key = r.u8();
            const auto value = r.i32();
            if (key == 0 || key > kMaxAttrKey || key <= prev_key)
                throw ModelError(ModelErrc::invalid_attribute, "unknown or unordered attribute key " + std::to_string(key),
                                 {}, at);
            prev_key = key;
            l.attrs.emplace(static_cast<AttrKey>(key), value);
        }
        g.layers.push_back(std::move(l));
    }
    const auto io_at = r.pos();
    for (std::uint32_t i = 0; i < input_count; ++i) g.inputs.push_back(r.i32());
    for (std::uint32_t i = 0; i < output_count; ++i) g.outputs.push_back(r.i32());

    const auto blob_at = r.pos();
    if (r.remaining() < payload_size)
        throw ModelError(ModelErrc::truncated_payload,
                         "payload blob has " + std::to_string(r.remaining()) + " of " + std::to_string(payload_size) +
                             " bytes",
                         {}, blob_at);
    if (r.remaining() > payload_size)
        throw ModelError(ModelErrc::trailing_bytes, std::to_string(r.remaining() - payload_size) + " unexpected bytes",
                         {}, blob_at + payload_size);
    const auto blob = r.take(static_cast<std::size_t>(payload_size));
    for (const auto& p : payloads) {
        auto& t = g.tensors[p.tensor];
        t.constant = detail::read_payload(blob.subspan(p.offset, p.length), t.dtype);
    }

    try {
        finalize(g, false);
    } catch (const ModelError& e) {
        const auto& s = e.site();
        if (s.layer) throw e.at_offset(layer_offsets[*s.layer]);
        if (s.tensor_index) throw e.at_offset(tensor_offsets[*s.tensor_index]);
        throw e.at_offset(io_at);
    }
    return g;
}

/// Table 1 "ROM Usage": the serialized model size in bytes.
inline std::size_t rom_size(const ModelGraph& g) { return serialize_model(g).size(); }

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path.string());
}

inline ModelGraph load_model(const std::filesystem::path& path) { return parse_model(read_file_bytes(path)); }

inline void save_model(const std::filesystem::path& path, const ModelGraph& g) {
    write_file_bytes(path, serialize_model(g));
}

} // namespace rockhunt
