// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are pinned here.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "checks.hpp"
#include "rockhunt/rockhunt.hpp"
#include "rockhunt/synthetic.hpp"

using namespace rockhunt;

namespace {

constexpr double kMinFloatAccuracy = 0.95;
constexpr double kClassifierSeconds = 60;
constexpr std::size_t kMinParams = 100000;
constexpr double kMaxRomRatio = 0.40;
constexpr double kMaxRamRatio = 0.50;
constexpr double kMaxLatencyRatio = 0.80;
constexpr double kRatioSeconds = 120;
constexpr double kKernelTol = 1e-5;
constexpr double kKernelSeconds = 300;
constexpr double kArenaRatio = 1.2;
constexpr double kArenaSeconds = 120;
constexpr double kFigureTol = 0.1;
constexpr double kFigureAccuracy = 0.974;
constexpr double kFigureAccuracyTol = 0.0005;

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %-22s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<Tensor> images_of(std::span<const EvalExample> set) {
    std::vector<Tensor> v;
    for (const auto& e : set) v.push_back(e.image);
    return v;
}

const std::vector<std::string> kClasses(kClassNames.begin(), kClassNames.end());

struct ClassifierRun {
    double float_acc = 0, int8_acc = 0, seconds = 0;
};

const ClassifierRun& classifier_run() {
    static const ClassifierRun r = [] {
        const auto t0 = clock_type::now();
        const auto design = synthetic::make_tile_corpus(40, synthetic::kDesignSeed);
        const auto g = synthetic::build_texture_classifier(design);
        const auto corpus = synthetic::make_tile_corpus(200, synthetic::kCorpusSeed);
        ClassifierRun out;
        out.float_acc = accuracy(evaluate(g, corpus, kClasses));
        out.seconds = seconds_since(t0);
        const auto q = quantize_model(g, calibrate(g, images_of(design)));
        out.int8_acc = accuracy(evaluate(q, corpus, kClasses));
        return out;
    }();
    return r;
}

Outcome classifier_accuracy() {
    const auto& r = classifier_run();
    return {r.float_acc >= kMinFloatAccuracy && r.seconds < kClassifierSeconds,
            fmt("float32 accuracy %.4f on 600 tiles (>= %.2f), %.1f s (< %.0f s)", r.float_acc, kMinFloatAccuracy,
                r.seconds, kClassifierSeconds)};
}

Outcome int8_degrades() {
    const auto& r = classifier_run();
    return {r.int8_acc < r.float_acc, fmt("int8 %.4f < float32 %.4f", r.int8_acc, r.float_acc)};
}

Outcome edge_ratios() {
    const auto t0 = clock_type::now();
    const auto g = synthetic::build_mobilenet_fixture();
    std::size_t params = 0;
    for (const auto& t : g.tensors)
        if (t.is_constant()) params += static_cast<std::size_t>(element_count(t.shape));
    const auto calib = synthetic::make_tile_corpus(4, synthetic::kDesignSeed);
    const auto q = quantize_model(g, calibrate(g, images_of(calib)));
    BenchOptions opts;
    opts.reps = 31;
    opts.warmup = 3;
    const auto f = benchmark(g, calib, opts, "float32");
    const auto i = benchmark(q, calib, opts, "int8");
    const double rom = double(i.rom_bytes) / double(f.rom_bytes);
    const double ram = double(i.peak_ram_bytes) / double(f.peak_ram_bytes);
    const double lat = i.inference_ms / f.inference_ms;
    const double secs = seconds_since(t0);
    return {params >= kMinParams && rom <= kMaxRomRatio && ram <= kMaxRamRatio && lat <= kMaxLatencyRatio &&
                secs < kRatioSeconds,
            fmt("%zu params; ROM %.3f (<= %.2f), RAM %.3f (<= %.2f), latency %.3f (<= %.2f; %.2f/%.2f ms), %.1f s",
                params, rom, kMaxRomRatio, ram, kMaxRamRatio, lat, kMaxLatencyRatio, i.inference_ms, f.inference_ms,
                secs)};
}

Outcome kernels_match() {
    const auto t0 = clock_type::now();
    const auto r = checks::kernel_sweep(500, 500);
    const double secs = seconds_since(t0);
    return {r.cases == 500 && r.max_float_error <= kKernelTol && r.int8_mismatches == 0 && r.failures.empty() &&
                secs < kKernelSeconds,
            fmt("%zu shapes; max float error %.2e (<= %.0e); %zu/%zu int8 mismatches; %.1f s", r.cases,
                r.max_float_error, kKernelTol, r.int8_mismatches, r.int8_checked, secs)};
}

Outcome nms_matches() {
    const auto bad = checks::nms_sweep(1000, 1000);
    return {bad == 0, fmt("%zu/1000 trials differ from the brute-force reference", bad)};
}

Outcome arena_valid() {
    const auto t0 = clock_type::now();
    std::size_t fixture_violations = 0;
    const auto design = synthetic::make_tile_corpus(4, synthetic::kDesignSeed);
    for (const auto& g : {synthetic::build_mobilenet_fixture(), synthetic::build_rock_detector(),
                          synthetic::build_texture_classifier(design)})
        fixture_violations += plan_violations(plan_arena(g)).size();
    const auto r = checks::arena_sweep(6, 100);
    const double secs = seconds_since(t0);
    return {fixture_violations == 0 && r.violations == 0 && r.worst_ratio <= kArenaRatio && r.chain_nonoptimal == 0 &&
                secs < kArenaSeconds,
            fmt("fixture violations %zu; %zu graphs, %zu violations, worst %.3f x optimal (<= %.1f); "
                "%zu/%zu chains suboptimal; %.1f s",
                fixture_violations, r.graphs, r.violations, r.worst_ratio, kArenaRatio, r.chain_nonoptimal,
                r.chain_cases, secs)};
}

Outcome tiling() {
    const auto pad = tile_count(16000, 4721, TileSpec::square(224, 224, TilePolicy::pad_edge));
    const auto drop = tile_count(16000, 4721, TileSpec::square(224, 224, TilePolicy::drop_partial));
    const auto r = checks::tiling_sweep(7, 50);
    return {pad == 1584 && drop == 1491 && r.coverage_failures == 0 && r.reassembly_failures == 0,
            fmt("pad_edge %zu (1584), drop_partial %zu (1491); %zu sizes, %zu coverage / %zu reassembly failures",
                pad, drop, r.images, r.coverage_failures, r.reassembly_failures)};
}

Outcome split_rule() {
    const auto c = split_counts(1583, {});
    Xoshiro256 rng(8);
    std::size_t bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto n = static_cast<std::size_t>(rng.between(1, 100000));
        const auto k = split_counts(n, {});
        bad += k.train + k.val + k.test != n;
    }
    return {c == SplitCounts{1108, 237, 238} && bad == 0,
            fmt("1583 -> %zu/%zu/%zu (1108/237/238); %zu/1000 partitions off", c.train, c.val, c.test, bad)};
}

Outcome confusion_fixture() {
    const auto [truth, pred] = checks::figure_fixture();
    const auto cm = confusion(std::span<const std::string>(truth), std::span<const std::string>(pred),
                              {"rock", "rover", "other"});
    const double want[3][3] = {{99.0, 1.0, 0.0}, {5.5, 94.5, 0.0}, {0.0, 1.3, 98.8}};
    const auto p = cm.row_percentages();
    double worst = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(p[i][j] - want[i][j]));
    const double acc = accuracy(cm);
    return {worst <= kFigureTol && std::abs(acc - kFigureAccuracy) <= kFigureAccuracyTol,
            fmt("max row-%% error %.3f (<= %.1f); accuracy %.4f (%.3f)", worst, kFigureTol, acc, kFigureAccuracy)};
}

Outcome detection_counts() {
    const auto g = synthetic::build_rock_detector();
    Interpreter interp(g);
    const auto frames = synthetic::make_rock_frames(34, 99);
    std::vector<std::vector<BBox>> found;
    std::size_t wrong = 0;
    for (const auto& f : frames) {
        found.push_back(synthetic::detect(interp, g, f.image));
        wrong += found.back().size() != f.rocks.size();
    }
    const auto s = count_rocks(found);
    return {wrong == 0 && s.min == 0 && s.max == 34,
            fmt("%zu frames, %zu with wrong counts; min %zu max %zu (0..34)", frames.size(), wrong, s.min, s.max)};
}

Outcome format_fuzz() {
    const auto r = checks::format_fuzz(11, 10000, 10000);
    return {r.roundtrip_failures == 0 && r.untyped_errors == 0 && r.typed_errors + r.accepted == r.mutations,
            fmt("%zu roundtrips, %zu failed; %zu mutations: %zu typed errors, %zu accepted, %zu untyped",
                r.roundtrips, r.roundtrip_failures, r.mutations, r.typed_errors, r.accepted, r.untyped_errors)};
}

} // namespace

int main() {
    report("classifier-accuracy", classifier_accuracy);
    report("edge-ratios", edge_ratios);
    report("int8-degradation", int8_degrades);
    report("kernel-oracles", kernels_match);
    report("nms-brute-force", nms_matches);
    report("arena-planner", arena_valid);
    report("tiling", tiling);
    report("split-rule", split_rule);
    report("confusion-fixture", confusion_fixture);
    report("detection-counts", detection_counts);
    report("format-fuzz", format_fuzz);
    std::printf("%d criteria failed\n", failures);
    return failures ? 1 : 0;
}
