// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rockhunt/error.hpp"
#include "rockhunt/prng.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {

// ------------------------------------------------------------------ tiling

enum class TilePolicy { pad_edge, drop_partial };

inline const char* policy_name(TilePolicy p) noexcept { return p == TilePolicy::pad_edge ? "pad_edge" : "drop_partial"; }

inline TilePolicy parse_policy(std::string_view s) {
    if (s == "pad_edge") return TilePolicy::pad_edge;
    if (s == "drop_partial") return TilePolicy::drop_partial;
    throw ArgumentError("unknown tiling policy '" + std::string(s) + "' (pad_edge | drop_partial)");
}

struct TileSpec {
    std::int32_t tile_w = 224, tile_h = 224;
    std::int32_t stride_x = 224, stride_y = 224;
    TilePolicy policy = TilePolicy::pad_edge;

    static TileSpec square(std::int32_t tile, std::int32_t stride, TilePolicy policy) {
        return {tile, tile, stride, stride, policy};
    }
};

/// Tile origins along one axis of length `extent`. pad_edge keeps stepping
/// until a tile reaches the far edge (ceil(max(extent - tile, 0) / stride) + 1
/// origins); drop_partial keeps only tiles that fit entirely
/// (floor((extent - tile) / stride) + 1, or none).
inline std::vector<std::int32_t> tile_origins(std::int32_t extent, std::int32_t tile, std::int32_t stride,
                                              TilePolicy policy) {
    if (tile < 1 || stride < 1) throw ArgumentError("tile and stride must be >= 1");
    if (extent < 0) throw ArgumentError("negative image extent");
    std::vector<std::int32_t> v;
    if (extent == 0) return v;
    if (policy == TilePolicy::drop_partial) {
        for (std::int64_t p = 0; p + tile <= extent; p += stride) v.push_back(static_cast<std::int32_t>(p));
    } else {
        for (std::int64_t p = 0;; p += stride) {
            v.push_back(static_cast<std::int32_t>(p));
            if (p + tile >= extent) break;
        }
    }
    return v;
}

/// Number of tiles tile_image() will emit for a width x height image.
inline std::size_t tile_count(std::int32_t width, std::int32_t height, const TileSpec& spec) {
    return tile_origins(width, spec.tile_w, spec.stride_x, spec.policy).size() *
           tile_origins(height, spec.tile_h, spec.stride_y, spec.policy).size();
}

struct Tile {
    std::string source;
    std::int32_t x = 0, y = 0; // top-left origin in the source, pixels
    std::int32_t width = 0, height = 0;
    Tensor pixels;             // (height, width, channels); out-of-image area is zero
};

namespace detail {

inline void expect_hwc(const Tensor& img) {
    if (img.shape().size() != 3) throw ShapeError("image must be (H, W, C), got " + shape_str(img.shape()));
}

} // namespace detail

/// Calls `fn` with each tile of `img` (H, W, C) in row-major origin order.
/// Only one tile is materialized at a time.
inline void for_each_tile(const Tensor& img, const TileSpec& spec, const std::string& source,
                          const std::function<void(Tile&&)>& fn) {
    detail::expect_hwc(img);
    const auto H = img.shape()[0], W = img.shape()[1], C = img.shape()[2];
    const auto xs = tile_origins(W, spec.tile_w, spec.stride_x, spec.policy);
    const auto ys = tile_origins(H, spec.tile_h, spec.stride_y, spec.policy);
    auto src = img.data<float>();
    for (auto y0 : ys) {
        for (auto x0 : xs) {
            std::vector<float> px(static_cast<std::size_t>(spec.tile_h) * spec.tile_w * C, 0.0f);
            const auto rows = std::min(spec.tile_h, H - y0);
            const auto cols = std::min(spec.tile_w, W - x0);
            for (std::int32_t r = 0; r < rows; ++r) {
                const auto* from = &src[((static_cast<std::size_t>(y0) + r) * W + x0) * C];
                std::copy(from, from + static_cast<std::size_t>(cols) * C, &px[static_cast<std::size_t>(r) * spec.tile_w * C]);
            }
            fn(Tile{source, x0, y0, spec.tile_w, spec.tile_h, Tensor({spec.tile_h, spec.tile_w, C}, std::move(px))});
        }
    }
}

inline std::vector<Tile> tile_image(const Tensor& img, const TileSpec& spec, const std::string& source = "image") {
    std::vector<Tile> tiles;
    for_each_tile(img, spec, source, [&](Tile&& t) { tiles.push_back(std::move(t)); });
    return tiles;
}

/// Inverse of tile_image(): pastes tiles back at their origins, dropping the
/// padded area. Pixels covered by no tile stay zero.
inline Tensor reassemble(const std::vector<Tile>& tiles, std::int32_t height, std::int32_t width, std::int32_t channels) {
    std::vector<float> out(static_cast<std::size_t>(height) * width * channels, 0.0f);
    for (const auto& t : tiles) {
        auto px = t.pixels.data<float>();
        const auto rows = std::min(t.height, height - t.y);
        const auto cols = std::min(t.width, width - t.x);
        for (std::int32_t r = 0; r < rows; ++r)
            std::copy(&px[static_cast<std::size_t>(r) * t.width * channels],
                      &px[static_cast<std::size_t>(r) * t.width * channels] + static_cast<std::size_t>(cols) * channels,
                      &out[((static_cast<std::size_t>(t.y) + r) * width + t.x) * channels]);
    }
    return Tensor({height, width, channels}, std::move(out));
}

// ---------------------------------------------------------------- splitting

enum class Split : std::uint8_t { train, val, test };

inline const char* split_name(Split s) noexcept {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ArgumentError("unknown split '" + std::string(s) + "'");
}

struct SplitRatios {
    double train = 0.70, val = 0.15, test = 0.15;
};

struct SplitCounts {
    std::size_t train = 0, val = 0, test = 0;
    bool operator==(const SplitCounts&) const = default;
};

/// train = floor(r_train * n), val = floor(r_val * n), test = the rest.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
    if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
        throw ArgumentError("split ratios must be non-negative and sum to 1");
    // The epsilon absorbs representation error such as 0.7 * 10 = 6.99...
    const auto take = [n](double f) { return static_cast<std::size_t>(std::floor(f * double(n) + 1e-9)); };
    SplitCounts c;
    c.train = std::min(n, take(r.train));
    c.val = std::min(n - c.train, take(r.val));
    c.test = n - c.train - c.val;
    return c;
}

struct SplitAssignment {
    std::map<std::string, Split> assignment;
    std::uint64_t seed = kDefaultSeed;

    SplitCounts counts() const {
        SplitCounts c;
        for (const auto& [id, s] : assignment) {
            if (s == Split::train) ++c.train;
            else if (s == Split::val) ++c.val;
            else ++c.test;
        }
        return c;
    }

    bool operator==(const SplitAssignment&) const = default;
};

namespace detail {

inline void assign_shuffled(std::vector<std::string> ids, const SplitRatios& r, Xoshiro256& rng, SplitAssignment& out) {
    const auto c = split_counts(ids.size(), r);
    shuffle(ids, rng);
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.assignment[ids[i]] = i < c.train ? Split::train : i < c.train + c.val ? Split::val : Split::test;
}

inline void expect_unique(const std::vector<std::string>& ids) {
    if (ids.empty()) throw ArgumentError("cannot split an empty id list");
    std::set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw ArgumentError("duplicate example id '" + id + "'");
}

} // namespace detail

/// Seeded shuffle of `ids` (in the given order) followed by the floor rule.
inline SplitAssignment split_dataset(const std::vector<std::string>& ids, const SplitRatios& ratios = {},
                                     std::uint64_t seed = kDefaultSeed) {
    detail::expect_unique(ids);
    SplitAssignment out;
    out.seed = seed;
    Xoshiro256 rng(seed);
    detail::assign_shuffled(ids, ratios, rng, out);
    return out;
}

/// Applies the floor rule within each class separately; classes are visited
/// in ascending label order and share one generator.
inline SplitAssignment split_stratified(const std::vector<std::string>& ids, const std::vector<std::int32_t>& labels,
                                        const SplitRatios& ratios = {}, std::uint64_t seed = kDefaultSeed) {
    detail::expect_unique(ids);
    if (labels.size() != ids.size()) throw ArgumentError("ids and labels differ in length");
    std::map<std::int32_t, std::vector<std::string>> by_class;
    for (std::size_t i = 0; i < ids.size(); ++i) by_class[labels[i]].push_back(ids[i]);
    SplitAssignment out;
    out.seed = seed;
    Xoshiro256 rng(seed);
    for (auto& [label, members] : by_class) detail::assign_shuffled(std::move(members), ratios, rng, out);
    return out;
}

// ------------------------------------------------------------------ labels

/// Classification classes, in index order (folder names).
inline const std::array<std::string, 3> kClassNames = {"other", "rock", "rover"};

inline std::optional<std::int32_t> class_index(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i)
        if (kClassNames[i] == name) return static_cast<std::int32_t>(i);
    return std::nullopt;
}

/// Annotated box in normalized tile coordinates (corner form).
struct LabelBox {
    std::int32_t class_id = 0;
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    struct Pixels {
        double x_min, y_min, x_max, y_max;
    };
    Pixels to_pixels(double width, double height) const {
        return {x_min * width, y_min * height, x_max * width, y_max * height};
    }

    static LabelBox from_center(std::int32_t cls, double cx, double cy, double w, double h) {
        return {cls, cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    }

    /// (cx, cy, w, h)
    std::array<double, 4> center_form() const {
        return {(x_min + x_max) / 2, (y_min + y_max) / 2, x_max - x_min, y_max - y_min};
    }

    bool operator==(const LabelBox&) const = default;
};

struct LabeledExample {
    std::string id;                     // tile id (file stem)
    std::filesystem::path image;        // empty when only labels were loaded
    std::optional<std::int32_t> label;  // classification
    std::vector<LabelBox> boxes;        // detection
};

namespace detail {

inline double parse_real(std::string_view s, std::size_t line) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        throw LabelError(line, "not a number: '" + std::string(s) + "'");
    return v;
}

} // namespace detail

/// Parses "class cx cy w h" records (one per line, normalized to the tile).
/// Blank lines are ignored.
inline std::vector<LabelBox> parse_labels(std::istream& in) {
    std::vector<LabelBox> boxes;
    std::string text;
    for (std::size_t line = 1; std::getline(in, text); ++line) {
        if (!text.empty() && text.back() == '\r') text.pop_back();
        std::istringstream fields(text);
        std::vector<std::string> f;
        for (std::string tok; fields >> tok;) f.push_back(tok);
        if (f.empty()) continue;
        if (f.size() != 5)
            throw LabelError(line, "expected 5 fields (class cx cy w h), got " + std::to_string(f.size()));
        std::int32_t cls = 0;
        auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), cls);
        if (ec != std::errc{} || p != f[0].data() + f[0].size() || cls < 0)
            throw LabelError(line, "bad class id '" + f[0] + "'");
        double v[4];
        for (int i = 0; i < 4; ++i) v[i] = detail::parse_real(f[i + 1], line);
        for (int i = 0; i < 4; ++i)
            if (v[i] < 0.0 || v[i] > 1.0) throw LabelError(line, "coordinate " + f[i + 1] + " outside [0, 1]");
        if (v[2] <= 0.0 || v[3] <= 0.0) throw LabelError(line, "box extent must be positive");
        boxes.push_back(LabelBox::from_center(cls, v[0], v[1], v[2], v[3]));
    }
    return boxes;
}

inline std::vector<LabelBox> load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return parse_labels(in);
}

namespace detail {

inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir, std::string_view ext) {
    if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ext) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace detail

/// Every *.txt file of `dir` as one detection example, ordered by file name.
/// The image path is filled in when a same-stem .png exists.
inline std::vector<LabeledExample> load_label_dir(const std::filesystem::path& dir) {
    std::vector<LabeledExample> out;
    for (const auto& f : detail::sorted_files(dir, ".txt")) {
        LabeledExample ex;
        ex.id = f.stem().string();
        ex.boxes = load_labels(f);
        auto png = f;
        png.replace_extension(".png");
        if (std::filesystem::exists(png)) ex.image = png;
        out.push_back(std::move(ex));
    }
    return out;
}

/// Classification corpus laid out as root/<class>/<tile>.png for the
/// classes in kClassNames; missing class folders are allowed.
inline std::vector<LabeledExample> load_class_folders(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw Error("not a directory: " + root.string());
    std::vector<LabeledExample> out;
    for (std::size_t c = 0; c < kClassNames.size(); ++c) {
        const auto dir = root / kClassNames[c];
        if (!std::filesystem::is_directory(dir)) continue;
        for (const auto& f : detail::sorted_files(dir, ".png"))
            out.push_back({kClassNames[c] + "/" + f.stem().string(), f, static_cast<std::int32_t>(c), {}});
    }
    return out;
}

// ---------------------------------------------------------------- manifest

struct ManifestRow {
    std::string id;
    std::string source;
    std::int32_t x = 0, y = 0;
    std::string split = "-"; // train | val | test | -
    std::string label = "-";

    bool operator==(const ManifestRow&) const = default;
};

inline std::string manifest_line(const ManifestRow& r) {
    return r.id + '\t' + r.source + '\t' + std::to_string(r.x) + '\t' + std::to_string(r.y) + '\t' + r.split + '\t' +
           r.label;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : rows) out << manifest_line(r) << '\n';
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<ManifestRow> rows;
    std::string text;
    for (std::size_t line = 1; std::getline(in, text); ++line) {
        if (text.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t tab; (tab = text.find('\t', start)) != std::string::npos; start = tab + 1)
            f.push_back(text.substr(start, tab - start));
        f.push_back(text.substr(start));
        if (f.size() != 6) throw LabelError(line, "manifest rows have 6 tab-separated fields");
        ManifestRow r;
        r.id = f[0];
        r.source = f[1];
        try {
            r.x = std::stoi(f[2]);
            r.y = std::stoi(f[3]);
        } catch (const std::exception&) {
            throw LabelError(line, "bad tile origin");
        }
        r.split = f[4];
        r.label = f[5];
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace rockhunt
