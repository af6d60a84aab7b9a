// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "checks.hpp"
#include "rockhunt/model_format.hpp"
#include "rockhunt/synthetic.hpp"

namespace rockhunt {
namespace {

ModelGraph relu_graph() {
    GraphBuilder b;
    b.output(b.relu6(b.input({1, 2})));
    return b.build();
}

ModelErrc parse_error(std::span<const std::uint8_t> bytes) {
    try {
        parse_model(bytes);
    } catch (const ModelError& e) {
        return e.code();
    }
    ADD_FAILURE() << "parse succeeded";
    return ModelErrc::invalid_field;
}

TEST(ModelFormat, Roundtrip) {
    const auto g = relu_graph();
    const auto bytes = serialize_model(g);
    EXPECT_EQ(std::memcmp(bytes.data(), "RGLM", 4), 0);
    EXPECT_EQ(parse_model(bytes), g);
    EXPECT_EQ(serialize_model(parse_model(bytes)), bytes);
}

TEST(ModelFormat, EmptyGraphIsHeaderPlusTables) {
    ModelGraph g;
    g.tensors.push_back({0, DType::float32, {1, 4}, std::nullopt, std::nullopt});
    g.inputs = {0};
    g.outputs = {0};
    finalize(g);
    const auto bytes = serialize_model(g);
    // 32-byte header, one 15-byte rank-2 tensor record, two ids.
    EXPECT_EQ(bytes.size(), kHeaderBytes + 15 + 8);
    EXPECT_EQ(parse_model(bytes), g);

    ModelGraph none;
    finalize(none);
    EXPECT_EQ(rom_size(none), kHeaderBytes);
}

TEST(ModelFormat, Deterministic) {
    EXPECT_EQ(serialize_model(synthetic::build_mobilenet_fixture()), serialize_model(synthetic::build_mobilenet_fixture()));
}

TEST(ModelFormat, MagicOnlyIsTruncated) {
    const std::uint8_t magic[] = {'R', 'G', 'L', 'M'};
    EXPECT_EQ(parse_error(magic), ModelErrc::truncated_payload);
}

TEST(ModelFormat, BadMagicAndVersion) {
    auto bytes = serialize_model(relu_graph());
    auto wrong = bytes;
    wrong[0] = 'X';
    EXPECT_EQ(parse_error(wrong), ModelErrc::bad_magic);
    wrong = bytes;
    wrong[4] = 2;
    EXPECT_EQ(parse_error(wrong), ModelErrc::unsupported_version);
    wrong = bytes;
    wrong.push_back(0);
    EXPECT_EQ(parse_error(wrong), ModelErrc::trailing_bytes);
}

TEST(ModelFormat, DanglingReferenceNamesTheId) {
    auto bytes = serialize_model(relu_graph());
    // Header (32) + two rank-2 tensor records (15 each) + kind + input count.
    const std::size_t at = kHeaderBytes + 30 + 2;
    ASSERT_EQ(bytes[at], 0);
    bytes[at] = 99;
    try {
        parse_model(bytes);
        FAIL() << "parse succeeded";
    } catch (const ModelError& e) {
        EXPECT_EQ(e.code(), ModelErrc::dangling_reference);
        EXPECT_NE(std::string(e.what()).find("99"), std::string::npos) << e.what();
        ASSERT_TRUE(e.offset().has_value());
        EXPECT_EQ(*e.offset(), kHeaderBytes + 30);
    }
}

TEST(ModelFormat, CycleIsRejected) {
    GraphBuilder b;
    auto x = b.input({1, 2});
    auto y = b.relu6(x);
    auto z = b.relu6(y);
    b.output(z);
    auto g = b.build();
    g.layers[0].inputs = {z}; // y now depends on z
    EXPECT_EQ(parse_error(serialize_model(g)), ModelErrc::cyclic_graph);
}

TEST(ModelFormat, ShapeMismatchIsRejected) {
    auto g = relu_graph();
    g.tensors[1].shape = {1, 3};
    EXPECT_EQ(parse_error(serialize_model(g)), ModelErrc::shape_mismatch);
}

TEST(ModelFormat, UnknownAttributeIsRejected) {
    auto g = relu_graph();
    g.layers[0].attrs[AttrKey::axis] = 1;
    EXPECT_EQ(parse_error(serialize_model(g)), ModelErrc::invalid_attribute);
}

TEST(ModelFormat, BadStrideIsRejected) {
    GraphBuilder b;
    b.output(b.max_pool(b.input({1, 4, 4, 1})));
    auto g = b.build();
    g.layers[0].attrs[AttrKey::stride_h] = 0;
    EXPECT_EQ(parse_error(serialize_model(g)), ModelErrc::invalid_attribute);
}

TEST(ModelFormat, ConstantCostsPayloadPlusRecord) {
    GraphBuilder b;
    b.output(b.relu6(b.input({1, 2})));
    const auto base = rom_size(b.build());
    b.constant(Tensor({1000}, std::vector<float>(1000, 0.5f)));
    // rank-1 record: id, dtype, rank, one extent, flags, offset, length.
    EXPECT_EQ(rom_size(b.build()), base + 4000 + (4 + 1 + 1 + 4 + 1 + 8 + 8));
}

TEST(ModelFormat, QuantizedWeightsAreAQuarter) {
    const auto g = synthetic::build_mobilenet_fixture();
    Xoshiro256 rng(1);
    const auto q = checks::random_quantized_graph(rng); // int8 and int32 payloads
    EXPECT_EQ(parse_model(serialize_model(q)), q);

    std::vector<Tensor> images(2, Tensor::zeros(g.tensor(g.inputs[0]).shape, DType::float32));
    images[1] = Tensor(images[1].shape(), std::vector<float>(images[1].size(), 1.0f));
    const auto gq = quantize_model(g, calibrate(g, images));
    std::size_t fw = 0, qw = 0;
    for (const auto& t : g.tensors)
        if (t.is_constant() && t.shape.size() == 4) fw += static_cast<std::size_t>(t.byte_size());
    for (const auto& t : gq.tensors)
        if (t.is_constant() && t.shape.size() == 4) qw += static_cast<std::size_t>(t.byte_size());
    EXPECT_EQ(qw * 4, fw);
    EXPECT_LE(double(rom_size(gq)) / double(rom_size(g)), 0.40);
}

TEST(ModelFormat, RoundtripAndMutationFuzz) {
    const auto r = checks::format_fuzz(2026, 10000, 10000);
    EXPECT_EQ(r.roundtrip_failures, 0u);
    EXPECT_EQ(r.untyped_errors, 0u) << (r.untyped.empty() ? "" : r.untyped.front());
    EXPECT_EQ(r.typed_errors + r.accepted, r.mutations);
    EXPECT_GT(r.typed_errors, r.mutations / 2);
}

TEST(ModelFormat, FileIo) {
    const auto path = std::filesystem::temp_directory_path() / "rockhunt_model_format_test.rglm";
    const auto g = relu_graph();
    save_model(path, g);
    EXPECT_EQ(load_model(path), g);
    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), Error);
}

} // namespace
} // namespace rockhunt
