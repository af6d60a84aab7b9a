// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// rockhunt: chip -> quantize -> infer/detect -> eval/bench.
//
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rockhunt/rockhunt.hpp"

namespace fs = std::filesystem;
using namespace rockhunt;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write only to
/// slot i of pre-sized outputs, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < n;) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!error) error = std::current_exception();
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

std::vector<fs::path> pngs_under(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

/// Image prepared for a graph whose input is (1, H, W, C).
Tensor load_model_image(const fs::path& path, const ModelGraph& g) {
    auto img = load_png(path);
    const auto& in = g.tensor(g.inputs.at(0)).shape;
    if (img.size() != static_cast<std::size_t>(element_count(in)))
        throw ShapeError(path.string() + " is " + shape_str(img.shape()) + ", model input is " + shape_str(in));
    return img.reshaped(in);
}

/// Labeled images of `dir`: a manifest.tsv with class labels (optionally
/// restricted to one split) if present, otherwise <class>/ folders.
std::vector<LabeledExample> labeled_images(const fs::path& dir, const std::string& split) {
    std::vector<LabeledExample> out;
    if (fs::exists(dir / "manifest.tsv")) {
        for (const auto& row : read_manifest(dir / "manifest.tsv")) {
            if (!split.empty() && row.split != split) continue;
            auto cls = class_index(row.label);
            if (!cls) continue;
            out.push_back({row.id, dir / (row.id + ".png"), cls, {}});
        }
        return out;
    }
    out = load_class_folders(dir);
    if (!split.empty()) throw ArgumentError("--split needs a manifest.tsv in " + dir.string());
    return out;
}

std::vector<EvalExample> load_eval_examples(const fs::path& dir, const std::string& split, const ModelGraph& g,
                                            unsigned jobs) {
    const auto labeled = labeled_images(dir, split);
    std::vector<EvalExample> set(labeled.size());
    parallel_for(labeled.size(), jobs,
                 [&](std::size_t i) { set[i] = {load_model_image(labeled[i].image, g), *labeled[i].label}; });
    return set;
}

std::vector<Anchor> parse_anchors(const std::string& text) {
    std::vector<Anchor> anchors;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto x = item.find('x');
        if (x == std::string::npos) throw ArgumentError("anchor '" + item + "' is not WxH");
        try {
            anchors.push_back({std::stod(item.substr(0, x)), std::stod(item.substr(x + 1))});
        } catch (const std::exception&) {
            throw ArgumentError("anchor '" + item + "' is not WxH");
        }
    }
    if (anchors.empty()) throw ArgumentError("no anchors given");
    return anchors;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// ------------------------------------------------------------------ chip

struct ChipArgs {
    fs::path image, out;
    std::int32_t tile = 224, stride = 0;
    std::string policy = "pad_edge", label;
    bool no_split = false;
};

void run_chip(const ChipArgs& a, std::uint64_t seed, unsigned jobs) {
    const auto img = load_png(a.image);
    const auto spec = TileSpec::square(a.tile, a.stride > 0 ? a.stride : a.tile, parse_policy(a.policy));
    if (!a.label.empty() && !class_index(a.label)) throw ArgumentError("unknown class label '" + a.label + "'");
    const auto tiles = tile_image(img, spec, a.image.stem().string());
    fs::create_directories(a.out);

    std::vector<ManifestRow> rows(tiles.size());
    std::vector<std::string> ids(tiles.size());
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "t%04zu", i);
        ids[i] = id;
        rows[i] = {id, tiles[i].source, tiles[i].x, tiles[i].y, "-", a.label.empty() ? "-" : a.label};
    }
    if (!a.no_split && !ids.empty()) {
        const auto split = split_dataset(ids, {}, seed);
        for (auto& r : rows) r.split = split_name(split.assignment.at(r.id));
    }
    parallel_for(tiles.size(), jobs, [&](std::size_t i) { save_png(a.out / (ids[i] + ".png"), tiles[i].pixels); });
    write_manifest(a.out / "manifest.tsv", rows);
    std::cout << tiles.size() << " tiles (" << policy_name(spec.policy) << ", tile " << spec.tile_w << ", stride "
              << spec.stride_x << ") from " << img.shape()[1] << "x" << img.shape()[0] << " -> " << a.out.string()
              << "\n";
}

// -------------------------------------------------------------- quantize

struct QuantizeArgs {
    fs::path model, calib, out;
    std::size_t limit = 0;
};

void run_quantize(const QuantizeArgs& a, unsigned jobs) {
    const auto g = load_model(a.model);
    std::vector<fs::path> files;
    if (fs::exists(a.calib / "manifest.tsv")) {
        for (const auto& row : read_manifest(a.calib / "manifest.tsv"))
            if (row.split == "train") files.push_back(a.calib / (row.id + ".png"));
    } else {
        files = pngs_under(a.calib);
    }
    if (a.limit > 0 && files.size() > a.limit) files.resize(a.limit);
    if (files.empty()) throw QuantizeError("no calibration images in " + a.calib.string());

    std::vector<Tensor> images(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) { images[i] = load_model_image(files[i], g); });
    const auto stats = calibrate(g, images, jobs);
    const auto q = quantize_model(g, stats);
    save_model(a.out, q);
    std::cout << "calibrated on " << stats.samples << " images; " << rom_size(g) << " -> " << rom_size(q)
              << " bytes -> " << a.out.string() << "\n";
}

// ----------------------------------------------------------------- infer

struct InferArgs {
    fs::path model, image, tiles;
    bool plan = false, trace = false, reference = false;
};

void run_infer(const InferArgs& a, unsigned jobs) {
    const auto g = load_model(a.model);
    if (a.plan) std::cout << dump_plan(plan_arena(g));
    std::vector<fs::path> files;
    if (!a.image.empty()) files.push_back(a.image);
    if (!a.tiles.empty()) {
        auto more = pngs_under(a.tiles);
        files.insert(files.end(), more.begin(), more.end());
    }
    RunOptions opts;
    opts.float_reference = a.reference;
    if (a.trace) jobs = 1;

    std::vector<std::string> lines(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) {
        Interpreter interp(g);
        const auto r = interp.invoke(prepare_input(g, load_model_image(files[i], g)), opts);
        const auto scores = output_values(r.outputs.at(0));
        std::ostringstream line;
        line << files[i].string();
        const auto best = argmax(scores);
        line << '\t' << (scores.size() == kClassNames.size() ? kClassNames[best] : std::to_string(best));
        char buf[32];
        for (float s : scores) {
            std::snprintf(buf, sizeof buf, "\t%.4f", s);
            line << buf;
        }
        line << '\n';
        if (a.trace) {
            for (const auto& t : r.trace.layers) {
                std::snprintf(buf, sizeof buf, "%.3f ms", t.ms);
                line << "  layer " << t.layer << ' ' << layer_kind_name(g.layers[t.layer].kind) << ' '
                     << shape_str(t.shape) << ' ' << buf << '\n';
            }
            std::snprintf(buf, sizeof buf, "%.3f ms", r.trace.total_ms);
            line << "  total " << buf << '\n';
        }
        lines[i] = line.str();
    });
    for (const auto& l : lines) std::cout << l;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
    fs::path model, tiles, out;
    double conf = kDefaultConfThreshold, iou = kDefaultIouThreshold, cell = 0;
    std::string anchors = "12x12,14x14", classes = "rock";
    bool labels = false;
};

void run_detect(const DetectArgs& a, unsigned jobs) {
    const auto g = load_model(a.model);
    if (!(a.conf >= 0 && a.conf <= 1)) throw ArgumentError("--conf must be in [0, 1]");
    if (!(a.iou > 0 && a.iou < 1)) throw ArgumentError("--iou must be in (0, 1)");
    const auto files = pngs_under(a.tiles);
    const auto& in_shape = g.tensor(g.inputs.at(0)).shape;
    const auto& out_shape = g.tensor(g.outputs.at(0)).shape;
    if (in_shape.size() != 4 || out_shape.size() < 3) throw ShapeError("detector must map (1, H, W, C) to a grid");
    const auto grid_w = out_shape[out_shape.size() - 2], grid_h = out_shape[out_shape.size() - 3];

    HeadSpec head;
    head.anchors = parse_anchors(a.anchors);
    OverlayOptions overlay;
    overlay.class_names = split_list(a.classes);
    overlay.draw_labels = a.labels;
    head.num_classes = static_cast<std::int32_t>(overlay.class_names.size());
    head.cell_w = a.cell > 0 ? a.cell : double(in_shape[2]) / grid_w;
    head.cell_h = a.cell > 0 ? a.cell : double(in_shape[1]) / grid_h;

    fs::create_directories(a.out);
    std::vector<std::vector<BBox>> frames(files.size());
    std::vector<std::vector<std::string>> records(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) {
        Interpreter interp(g); // per frame: the arena is small next to decode + PNG encode
        const auto image = load_png(files[i]);
        const auto r = interp.invoke(prepare_input(g, image));
        frames[i] = nms(decode_head(r.outputs.at(0), head, a.conf, in_shape[2], in_shape[1]), a.iou);
        const auto id = files[i].stem().string();
        auto o = emit_overlay(image, frames[i], id, overlay);
        write_file_bytes(a.out / (id + "_det.png"), o.png);
        records[i] = std::move(o.records);
    });

    std::string manifest, counts = "tile\trocks\n";
    const auto summary = count_rocks(frames, 0);
    for (std::size_t i = 0; i < files.size(); ++i) {
        for (const auto& r : records[i]) manifest += r + '\n';
        counts += files[i].stem().string() + '\t' + std::to_string(summary.counts[i]) + '\n';
    }
    write_text(a.out / "detections.tsv", manifest);
    write_text(a.out / "counts.tsv", counts);
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.2f", summary.mean);
    std::cout << files.size() << " frames; " << overlay.class_names.at(0) << "s per frame min " << summary.min
              << " max " << summary.max << " mean " << mean << " -> " << a.out.string() << "\n";
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
    fs::path model, eval;
    std::string split;
};

std::string format_confusion(const ConfusionMatrix& cm) {
    std::ostringstream os;
    const auto pct = cm.row_percentages();
    os << "truth \\ pred";
    for (const auto& c : cm.classes) os << '\t' << c;
    os << '\n';
    char buf[32];
    for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        os << cm.classes[i];
        for (std::size_t j = 0; j < cm.classes.size(); ++j) {
            std::snprintf(buf, sizeof buf, "\t%llu (%.1f%%)", static_cast<unsigned long long>(cm.counts[i][j]), pct[i][j]);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

void run_eval(const EvalArgs& a, unsigned jobs) {
    const auto g = load_model(a.model);
    const auto set = load_eval_examples(a.eval, a.split, g, jobs);
    if (set.empty()) throw EvalError("no labeled images in " + a.eval.string());
    const auto cm = evaluate(g, set, {kClassNames.begin(), kClassNames.end()}, jobs);
    std::cout << format_confusion(cm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "accuracy %.4f (%llu/%llu)\n", accuracy(cm),
                  static_cast<unsigned long long>(cm.correct()), static_cast<unsigned long long>(cm.total()));
    std::cout << buf;
}

// ----------------------------------------------------------------- bench

struct BenchArgs {
    std::vector<fs::path> models;
    fs::path eval;
    std::string split;
    std::size_t reps = 10, warmup = 2;
    bool tsv = false;
};

void run_bench(const BenchArgs& a) {
    std::vector<BenchReport> reports;
    BenchOptions opts;
    opts.reps = a.reps;
    opts.warmup = a.warmup;
    for (const auto& path : a.models) {
        const auto g = load_model(path);
        std::vector<EvalExample> set;
        if (!a.eval.empty()) set = load_eval_examples(a.eval, a.split, g, 1);
        reports.push_back(benchmark(g, set, opts, path.stem().string()));
    }
    std::cout << (a.tsv ? report_tsv(reports) : report_table(reports));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rockhunt: tile, quantize, run and score small CNNs for rover imagery"};
    app.require_subcommand(1);
    std::uint64_t seed = kDefaultSeed;
    unsigned jobs = 1;
    app.add_option("--seed", seed, "Seed for every random choice (splits)")->capture_default_str();
    app.add_option("--jobs", jobs, "Maximum concurrent images")->capture_default_str()->check(CLI::Range(1u, 256u));

    ChipArgs chip;
    auto* c = app.add_subcommand("chip", "Cut a panorama PNG into tiles plus manifest.tsv");
    c->add_option("--image", chip.image, "Panorama PNG")->required()->check(CLI::ExistingFile);
    c->add_option("--tile", chip.tile, "Tile edge in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--stride", chip.stride, "Step between tiles (default: tile)")->check(CLI::PositiveNumber);
    c->add_option("--policy", chip.policy, "pad_edge | drop_partial")
        ->capture_default_str()
        ->check(CLI::IsMember({"pad_edge", "drop_partial"}));
    c->add_option("--label", chip.label, "Class label written for every tile");
    c->add_flag("--no-split", chip.no_split, "Leave the split column empty");
    c->add_option("--out", chip.out, "Output directory")->required();

    QuantizeArgs quant;
    auto* q = app.add_subcommand("quantize", "Calibrate a float32 model and write its int8 twin");
    q->add_option("--model", quant.model, "Float32 .rglm")->required()->check(CLI::ExistingFile);
    q->add_option("--calib", quant.calib, "Calibration images (train split of manifest.tsv, else all PNGs)")
        ->required()
        ->check(CLI::ExistingDirectory);
    q->add_option("--limit", quant.limit, "Use at most this many calibration images (0: all)");
    q->add_option("--out", quant.out, "Output .rglm")->required();

    InferArgs infer;
    auto* i = app.add_subcommand("infer", "Classify images");
    i->add_option("--model", infer.model, ".rglm model")->required()->check(CLI::ExistingFile);
    auto* img_opt = i->add_option("--image", infer.image, "One PNG")->check(CLI::ExistingFile);
    auto* tiles_opt = i->add_option("--tiles", infer.tiles, "Directory of PNGs")->check(CLI::ExistingDirectory);
    img_opt->excludes(tiles_opt);
    i->add_flag("--plan", infer.plan, "Print the arena plan");
    i->add_flag("--trace", infer.trace, "Print per-layer timings (forces --jobs 1)");
    i->add_flag("--reference", infer.reference, "int8 models: dequantize/float/requantize per layer");

    DetectArgs det;
    auto* d = app.add_subcommand("detect", "Detect and count rocks; write overlays and manifests");
    d->add_option("--model", det.model, "Detector .rglm")->required()->check(CLI::ExistingFile);
    d->add_option("--tiles", det.tiles, "Directory of frame PNGs")->required()->check(CLI::ExistingDirectory);
    d->add_option("--conf", det.conf, "Confidence threshold")->capture_default_str();
    d->add_option("--iou", det.iou, "NMS IoU threshold")->capture_default_str();
    d->add_option("--anchors", det.anchors, "Anchor priors WxH,WxH,... in pixels")->capture_default_str();
    d->add_option("--cell", det.cell, "Grid cell size in pixels (default: input width / grid width)");
    d->add_option("--classes", det.classes, "Detector class names")->capture_default_str();
    d->add_flag("--labels", det.labels, "Draw 'rock 0.87' labels on overlays");
    d->add_option("--out", det.out, "Output directory")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Confusion matrix and accuracy over labeled tiles");
    e->add_option("--model", ev.model, ".rglm model")->required()->check(CLI::ExistingFile);
    e->add_option("--eval", ev.eval, "manifest.tsv directory or other/rock/rover folders")
        ->required()
        ->check(CLI::ExistingDirectory);
    e->add_option("--split", ev.split, "Only this manifest split")->check(CLI::IsMember({"train", "val", "test"}));

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Latency, peak RAM, ROM and accuracy table");
    b->add_option("--model", bench.models, ".rglm model (repeat for more rows)")->required()->check(CLI::ExistingFile);
    b->add_option("--eval", bench.eval, "Labeled tiles for the accuracy column")->check(CLI::ExistingDirectory);
    b->add_option("--split", bench.split, "Only this manifest split")->check(CLI::IsMember({"train", "val", "test"}));
    b->add_option("--reps", bench.reps, "Timed runs (median reported)")->capture_default_str()->check(CLI::Range(3, 100000));
    b->add_option("--warmup", bench.warmup, "Discarded runs before timing")->capture_default_str();
    b->add_flag("--tsv", bench.tsv, "Tab-separated output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*c) run_chip(chip, seed, jobs);
        else if (*q) run_quantize(quant, jobs);
        else if (*i) {
            if (infer.image.empty() && infer.tiles.empty()) {
                std::cerr << "infer: one of --image or --tiles is required\n" << i->help();
                return kExitUsage;
            }
            run_infer(infer, jobs);
        } else if (*d) run_detect(det, jobs);
        else if (*e) run_eval(ev, jobs);
        else if (*b) run_bench(bench);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitDomain;
    } catch (const fs::filesystem_error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitDomain;
    }
    return 0;
}
