// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "rockhunt/prng.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {
namespace {

TEST(Tensor, ShapeMustMatchData) {
    EXPECT_NO_THROW(Tensor({2, 3}, std::vector<float>(6)));
    EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
    EXPECT_THROW(Tensor({-1}, std::vector<float>{}), ShapeError);
}

TEST(Tensor, Int8RequiresQuantParams) {
    EXPECT_THROW(Tensor({1}, Buffer{std::vector<std::int8_t>{0}}, std::nullopt), DTypeError);
    EXPECT_THROW(Tensor({1}, Buffer{std::vector<float>{0}}, QuantParams{1.0, 0}), DTypeError);
    EXPECT_THROW(Tensor({1}, std::vector<std::int8_t>{0}, QuantParams{0.0, 0}), InvalidRangeError);
    EXPECT_THROW(Tensor({1}, std::vector<std::int8_t>{0}, QuantParams{1.0, 128}), InvalidRangeError);
}

TEST(Tensor, TypedAccessChecksDType) {
    const Tensor t({2}, std::vector<float>{1, 2});
    EXPECT_EQ(t.data<float>()[1], 2.0f);
    EXPECT_THROW(t.data<std::int8_t>(), DTypeError);
}

TEST(Tensor, ReshapeKeepsElements) {
    const Tensor t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    const auto r = t.reshaped({3, 2});
    EXPECT_EQ(r.shape(), (Shape{3, 2}));
    EXPECT_EQ(std::vector<float>(r.data<float>().begin(), r.data<float>().end()),
              std::vector<float>(t.data<float>().begin(), t.data<float>().end()));
    EXPECT_THROW(t.reshaped({4}), ShapeError);
}

TEST(ComputeQParams, SymmetricUnitRange) {
    const auto qp = compute_qparams(-1.0, 1.0);
    EXPECT_NEAR(qp.scale, 2.0 / 255.0, 1e-12);
    EXPECT_EQ(qp.zero_point, 0);
    // -1, 0 and 1 survive the roundtrip within half a quantum (plus float32
    // rounding of the dequantized value).
    for (double x : {-1.0, 0.0, 1.0})
        EXPECT_LE(std::abs(dequantize_value(quantize_value(x, qp), qp) - x), qp.scale / 2 + 1e-7) << x;
}

TEST(ComputeQParams, DegenerateRanges) {
    EXPECT_EQ(compute_qparams(0.0, 0.0), (QuantParams{1.0, 0}));
    // Widening to include zero makes (3, 3) a regular range.
    EXPECT_EQ(compute_qparams(3.0, 3.0).zero_point, -128);
}

TEST(ComputeQParams, ZeroToSix) {
    const auto qp = compute_qparams(0.0, 6.0);
    EXPECT_NEAR(qp.scale, 6.0 / 255.0, 1e-12);
    EXPECT_EQ(qp.zero_point, -128);
    EXPECT_EQ(quantize_value(0.0, qp), -128);
}

TEST(ComputeQParams, RejectsBadRanges) {
    EXPECT_THROW(compute_qparams(1.0, 0.0), InvalidRangeError);
    EXPECT_THROW(compute_qparams(-INFINITY, 0.0), InvalidRangeError);
    EXPECT_THROW(compute_qparams(0.0, NAN), InvalidRangeError);
}

TEST(Quantize, Examples) {
    EXPECT_EQ(quantize_value(0.0, {0.1, 0}), 0);
    EXPECT_EQ(quantize_value(1000.0, {0.1, 0}), 127);
    EXPECT_EQ(quantize_value(-1000.0, {0.1, 0}), -128);
    // 0.25 / 0.1 = 2.5 rounds away from zero to 3.
    EXPECT_EQ(quantize_value(0.25, {0.1, 5}), 8);
    EXPECT_EQ(quantize_value(-0.25, {0.1, 5}), 2);
}

TEST(Dequantize, Examples) {
    EXPECT_EQ(dequantize_value(7, {0.5, 7}), 0.0f);
    EXPECT_NEAR(dequantize_value(127, {0.0078431, 0}), 0.99607, 1e-5);
}

TEST(QuantizeProperty, RoundtripWithinHalfScale) {
    Xoshiro256 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const double lo = rng.uniform(-10, 1), hi = lo + rng.uniform(0.01, 20);
        const auto qp = compute_qparams(lo, hi);
        const double a = std::min(lo, 0.0), b = std::max(hi, 0.0);
        for (int i = 0; i <= 1000; ++i) {
            const double x = a + (b - a) * i / 1000.0;
            const double ulp = std::abs(x) * std::numeric_limits<float>::epsilon();
            ASSERT_LE(std::abs(double(dequantize_value(quantize_value(x, qp), qp)) - x), qp.scale / 2 + ulp)
                << "range " << lo << ".." << hi << " x " << x;
        }
        // Real zero is exact.
        ASSERT_EQ(dequantize_value(quantize_value(0.0, qp), qp), 0.0f);
    }
}

TEST(QuantizeProperty, IdempotentOnQuanta) {
    Xoshiro256 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const QuantParams qp{rng.uniform(1e-3, 2.0), static_cast<std::int32_t>(rng.between(-128, 127))};
        for (int q = -128; q <= 127; ++q) ASSERT_EQ(quantize_value(dequantize_value(q, qp), qp), q);
    }
}

TEST(QuantizeProperty, Monotone) {
    Xoshiro256 rng(13);
    const QuantParams qp{0.037, -17};
    std::vector<double> xs(5000);
    for (auto& x : xs) x = rng.uniform(-8, 8);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) ASSERT_LE(quantize_value(xs[i - 1], qp), quantize_value(xs[i], qp));
}

TEST(QuantizeTensor, ShapeAndParamsCarried) {
    const Tensor t({2, 2}, std::vector<float>{-1, 0, 0.5f, 1});
    const auto qp = compute_qparams(-1, 1);
    const auto q = quantize(t, qp);
    EXPECT_EQ(q.dtype(), DType::int8);
    EXPECT_EQ(*q.qparams(), qp);
    const auto back = dequantize(q);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back.data<float>()[i], t.data<float>()[i], qp.scale / 2 + 1e-7);
}

TEST(Prng, DeterministicAndSeedSensitive) {
    Xoshiro256 a(5), b(5), c(6);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        differs |= x != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Prng, BelowIsUniformEnough) {
    Xoshiro256 rng(7);
    std::vector<int> hist(6, 0);
    for (int i = 0; i < 60000; ++i) ++hist[rng.below(6)];
    for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

} // namespace
} // namespace rockhunt
