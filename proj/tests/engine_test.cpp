// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "checks.hpp"
#include "rockhunt/engine.hpp"
#include "rockhunt/quantizer.hpp"
#include "rockhunt/synthetic.hpp"

namespace rockhunt {
namespace {

std::vector<float> values(const Tensor& t) { return output_values(t); }

TEST(Engine, ReshapeIsIdentityOnData) {
    GraphBuilder b;
    b.output(b.reshape(b.input({1, 2, 3}), {1, 6}));
    const auto g = b.build();
    const Tensor x({1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    const auto r = run(g, x);
    EXPECT_EQ(r.outputs[0].shape(), (Shape{1, 6}));
    EXPECT_EQ(values(r.outputs[0]), values(x));
}

TEST(Engine, ConvMatchesNaiveOracle) {
    Xoshiro256 rng(21);
    oracle::Conv c{9, 7, 3, 5, 3, 3, 2, 1, true};
    const auto x = checks::random_floats(rng, 9 * 7 * 3);
    const auto w = checks::random_floats(rng, 5 * 3 * 3 * 3);
    const auto bias = checks::random_floats(rng, 5);
    GraphBuilder b;
    b.output(b.conv2d(b.input({1, 9, 7, 3}), Tensor({5, 3, 3, 3}, w), Tensor({5}, bias),
                      {2, 1, Padding::same, Activation::relu6}));
    const auto out = values(run(b.build(), Tensor({1, 9, 7, 3}, x)).outputs[0]);
    const auto want = oracle::conv2d(c, x, w, bias, true);
    ASSERT_EQ(out.size(), want.size());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], want[i], 1e-5) << i;
}

TEST(Engine, SoftmaxRowsSumToOne) {
    Xoshiro256 rng(22);
    GraphBuilder b;
    b.output(b.softmax(b.fully_connected(b.input({1, 12}), Tensor({4, 12}, checks::random_floats(rng, 48, -3, 3)),
                                         Tensor({4}, checks::random_floats(rng, 4)))));
    const auto g = b.build();
    Interpreter interp(g);
    for (int i = 0; i < 50; ++i) {
        const auto p = values(interp.invoke(Tensor({1, 12}, checks::random_floats(rng, 12, -4, 4))).outputs[0]);
        double sum = 0;
        for (float v : p) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Engine, RepeatedRunsAreBitIdentical) {
    const auto g = synthetic::build_mobilenet_fixture();
    Xoshiro256 rng(23);
    const auto& in = g.tensor(g.inputs[0]);
    const Tensor x(in.shape, checks::random_floats(rng, static_cast<std::size_t>(element_count(in.shape)), 0, 1));
    Interpreter interp(g);
    const auto a = interp.invoke(x), b = interp.invoke(x);
    EXPECT_EQ(a.outputs, b.outputs);
    EXPECT_TRUE(a.trace.same_schedule(b.trace));
    EXPECT_EQ(a.trace.layers.size(), g.layers.size());
    EXPECT_EQ(run(g, x).outputs, a.outputs);
}

TEST(Engine, TraceTotalCoversEveryLayer) {
    const auto g = synthetic::build_mobilenet_fixture();
    const auto& in = g.tensor(g.inputs[0]);
    const auto r = run(g, Tensor::zeros(in.shape, DType::float32));
    double max_layer = 0;
    for (const auto& l : r.trace.layers) max_layer = std::max(max_layer, l.ms);
    EXPECT_GE(r.trace.total_ms, max_layer);
}

TEST(Engine, RejectsMismatchedInputs) {
    GraphBuilder b;
    b.output(b.relu6(b.input({1, 4})));
    const auto g = b.build();
    Interpreter interp(g);
    EXPECT_THROW(interp.invoke(Tensor({1, 5}, std::vector<float>(5))), ShapeError);
    EXPECT_THROW(interp.invoke(Tensor({1, 4}, std::vector<std::int8_t>(4), QuantParams{1.0, 0})), DTypeError);
    EXPECT_THROW(interp.invoke(std::span<const Tensor>{}), ArgumentError);
}

TEST(Engine, RequiresFinalizedGraph) {
    GraphBuilder b;
    b.output(b.relu6(b.input({1, 4})));
    auto g = b.build();
    g.order.clear();
    EXPECT_THROW(Interpreter{g}, ArgumentError);
}

TEST(Engine, ObserverSeesInputAndEveryLayer) {
    GraphBuilder b;
    auto x = b.input({1, 3});
    auto y = b.relu6(x);
    b.output(b.softmax(y));
    const auto g = b.build();
    std::vector<TensorId> seen;
    RunOptions opts;
    opts.observer = [&](TensorId id, const Tensor&) { seen.push_back(id); };
    run(g, Tensor({1, 3}, std::vector<float>{-1, 0, 1}), opts);
    ASSERT_EQ(seen.size(), 3u);
    EXPECT_EQ(seen[0], x);
    EXPECT_EQ(seen[1], y);
}

TEST(Engine, Int8ConvTracksFloatReference) {
    Xoshiro256 rng(24);
    GraphBuilder b;
    b.output(b.conv2d(b.input({1, 8, 8, 3}), Tensor({4, 3, 3, 3}, checks::random_floats(rng, 108)),
                      Tensor({4}, checks::random_floats(rng, 4))));
    const auto g = b.build();
    std::vector<Tensor> calib;
    for (int i = 0; i < 8; ++i) calib.emplace_back(Shape{1, 8, 8, 3}, checks::random_floats(rng, 192));
    const auto q = quantize_model(g, calibrate(g, calib));
    const auto oq = *q.tensor(q.outputs[0]).qparams;
    Interpreter interp(q);
    RunOptions ref;
    ref.float_reference = true;
    for (const auto& x : calib) {
        const auto in = prepare_input(q, x);
        const auto ta = interp.invoke(in).outputs[0];
        const auto tr = interp.invoke(in, ref).outputs[0];
        const auto a = ta.data<std::int8_t>(), bq = tr.data<std::int8_t>();
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(std::abs(a[i] - bq[i]), 1) << i;
        const auto fo = values(run(g, x).outputs[0]);
        const auto qo = values(interp.invoke(in).outputs[0]);
        for (std::size_t i = 0; i < fo.size(); ++i) ASSERT_NEAR(qo[i], fo[i], 3 * oq.scale) << i;
    }
}

TEST(Engine, AlignmentOneStillRuns) {
    const auto g = synthetic::build_mobilenet_fixture();
    const auto& in = g.tensor(g.inputs[0]);
    const Tensor x = Tensor::zeros(in.shape, DType::float32);
    Interpreter tight(g, 1);
    EXPECT_LE(tight.plan().peak_bytes, Interpreter(g).plan().peak_bytes);
    EXPECT_EQ(tight.invoke(x).outputs, run(g, x).outputs);
}

} // namespace
} // namespace rockhunt
