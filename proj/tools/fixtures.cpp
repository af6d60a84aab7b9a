// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// rockhunt-fixtures: writes the synthetic models and images the CLI
// walkthrough in README.md runs against.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rockhunt/rockhunt.hpp"
#include "rockhunt/synthetic.hpp"

namespace fs = std::filesystem;
using namespace rockhunt;

namespace {

ModelGraph quantized(const ModelGraph& g, std::span<const EvalExample> calib) {
    std::vector<Tensor> images;
    for (const auto& ex : calib) images.push_back(ex.image);
    return quantize_model(g, calibrate(g, images));
}

/// Mosaic of random tiles cropped to width x height; rock and rover tiles
/// are rarer than soil, as on a real traverse.
Tensor panorama(std::int32_t width, std::int32_t height, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    const auto n = synthetic::kTileSize;
    std::vector<float> px(static_cast<std::size_t>(width) * height * 3);
    for (std::int32_t ty = 0; ty * n < height; ++ty)
        for (std::int32_t tx = 0; tx * n < width; ++tx) {
            const auto roll = rng.below(10);
            const auto cls = roll < 6 ? synthetic::soil : roll < 9 ? synthetic::rock : synthetic::rover;
            const auto tile = synthetic::render_tile(cls, rng);
            const auto src = tile.data<float>();
            for (std::int32_t y = 0; y < n && ty * n + y < height; ++y)
                for (std::int32_t x = 0; x < n && tx * n + x < width; ++x)
                    for (int c = 0; c < 3; ++c)
                        px[(static_cast<std::size_t>(ty * n + y) * width + tx * n + x) * 3 + c] =
                            src[(static_cast<std::size_t>(y) * n + x) * 3 + c];
        }
    return Tensor({height, width, 3}, std::move(px));
}

void run(const fs::path& out, std::uint64_t seed, std::size_t per_class) {
    fs::create_directories(out);
    const auto design = synthetic::make_tile_corpus(40, synthetic::kDesignSeed);
    const auto classifier = synthetic::build_texture_classifier(design);
    save_model(out / "classifier.rglm", classifier);
    save_model(out / "classifier_int8.rglm", quantized(classifier, design));

    const auto mobilenet = synthetic::build_mobilenet_fixture();
    save_model(out / "mobilenet.rglm", mobilenet);
    save_model(out / "mobilenet_int8.rglm", quantized(mobilenet, synthetic::make_tile_corpus(4, synthetic::kDesignSeed)));

    save_model(out / "detector.rglm", synthetic::build_rock_detector());

    const auto corpus = synthetic::make_tile_corpus(per_class, seed);
    std::vector<std::size_t> seen(kClassNames.size(), 0);
    for (const auto& ex : corpus) {
        const auto dir = out / "corpus" / kClassNames[static_cast<std::size_t>(ex.label)];
        fs::create_directories(dir);
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.png", seen[static_cast<std::size_t>(ex.label)]++);
        save_png(dir / name, ex.image);
    }

    fs::create_directories(out / "frames");
    std::ofstream planted(out / "frames" / "planted.tsv", std::ios::trunc);
    planted << "frame\trocks\n";
    const auto frames = synthetic::make_rock_frames(20, seed);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "f%03zu", i);
        save_png(out / "frames" / (std::string(name) + ".png"), frames[i].image);
        planted << name << '\t' << frames[i].rocks.size() << '\n';
    }

    save_png(out / "pano.png", panorama(1600, 472, seed));
    std::cout << "fixtures -> " << out.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Write synthetic rockhunt models, tiles, frames and a panorama"};
    fs::path out;
    std::uint64_t seed = synthetic::kCorpusSeed;
    std::size_t per_class = 200;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--seed", seed, "Seed for the corpus, frames and panorama")->capture_default_str();
    app.add_option("--per-class", per_class, "Corpus tiles per class")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 2;
    }
    try {
        run(out, seed, per_class);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
