// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "checks.hpp"
#include "rockhunt/kernels.hpp"

namespace rockhunt {
namespace {

using kernels::make_geometry;

TEST(Kernels, IdentityPointwiseConv) {
    const std::vector<float> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}; // 2x2x3
    std::vector<float> w(9, 0.0f), b(3, 0.0f), out(12);
    for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
    kernels::conv2d(x, w, b, out, make_geometry(2, 2, 3, 3, 1, 1, 1, 1, Padding::same), Activation::none);
    EXPECT_EQ(out, x);
}

TEST(Kernels, OnesKernelSumsWindow) {
    const std::vector<float> x = {1, 2, 3, 4}, w(4, 1.0f), b = {0.0f};
    std::vector<float> out(1);
    kernels::conv2d(x, w, b, out, make_geometry(2, 2, 1, 1, 2, 2, 1, 1, Padding::valid), Activation::none);
    EXPECT_EQ(out[0], 10.0f);
}

TEST(Kernels, Relu6) {
    const std::vector<float> x = {-3, 2, 9};
    std::vector<float> out(3);
    kernels::relu6(x, out);
    EXPECT_EQ(out, (std::vector<float>{0, 2, 6}));
}

TEST(Kernels, SoftmaxOfUniformLogits) {
    const std::vector<float> x(5, 3.25f);
    std::vector<float> out(5);
    kernels::softmax(x, out, 5);
    for (float p : out) EXPECT_NEAR(p, 0.2f, 1e-7);
}

TEST(Kernels, AveragePool) {
    const std::vector<float> x = {1, 2, 3, 4};
    std::vector<float> out(1);
    kernels::avg_pool(x, out, make_geometry(2, 2, 1, 1, 2, 2, 2, 2, Padding::valid));
    EXPECT_EQ(out[0], 2.5f);
}

TEST(Kernels, SamePaddingPutsOddPixelLast) {
    // 4 wide, kernel 2, stride 1: 1 pixel of padding, on the right.
    const auto g = make_geometry(1, 4, 1, 1, 1, 2, 1, 1, Padding::same);
    EXPECT_EQ(g.out_w, 4);
    EXPECT_EQ(g.pad_left, 0);
    const auto g3 = make_geometry(1, 4, 1, 1, 1, 3, 1, 1, Padding::same);
    EXPECT_EQ(g3.pad_left, 1);
    const auto gs = make_geometry(5, 5, 1, 1, 3, 3, 2, 2, Padding::same);
    EXPECT_EQ(gs.out_h, 3);
    EXPECT_EQ(gs.pad_top, 1);
}

TEST(Kernels, Int8AccumulatorSaturates) {
    // 127 * 127 * 200000 overflows int32; the result pins to the top of the
    // int32 range before requantization.
    const std::size_t n = 200000;
    const std::vector<std::int8_t> x(n, 127), w(n, 127);
    const std::vector<std::int32_t> b = {0};
    std::vector<std::int8_t> out(1);
    kernels::QuantizedLayerParams p;
    p.multiplier = quantize_multiplier(1.0 / 2147483647.0 * 100.0);
    kernels::fully_connected(x, w, b, out, p);
    EXPECT_EQ(out[0], 100);
}

TEST(Kernels, SweepAgainstOracles) {
    const auto r = checks::kernel_sweep(500, 500);
    EXPECT_EQ(r.cases, 500u);
    EXPECT_LE(r.max_float_error, 1e-5);
    EXPECT_EQ(r.int8_mismatches, 0u);
    for (const auto& f : r.failures) ADD_FAILURE() << f;
    EXPECT_GT(r.int8_checked, 5000u);
}

TEST(Kernels, ConcatSlices) {
    const std::vector<float> a = {1, 2, 3, 4}, b = {5, 6};
    std::vector<float> out(6);
    // (2, 2) ++ (2, 1) along the last axis: blocks of 2 and 1 per row.
    kernels::concat_slice<float>(a, out, 2, 2, 3, 0, [](float v) { return v; });
    kernels::concat_slice<float>(b, out, 2, 1, 3, 2, [](float v) { return v; });
    EXPECT_EQ(out, (std::vector<float>{1, 2, 5, 3, 4, 6}));
}

} // namespace
} // namespace rockhunt
