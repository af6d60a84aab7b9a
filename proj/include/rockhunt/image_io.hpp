// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// PNG <-> (H, W, 3) float32 tensors in [0, 1], through libpng's simplified API.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rockhunt/error.hpp"
#include "rockhunt/model_format.hpp"
#include "rockhunt/tensor.hpp"

namespace rockhunt {

namespace detail {

struct PngImage {
    png_image img{};

    PngImage() {
        img.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&img); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;

    std::string message() const { return img.message[0] ? std::string(img.message) : std::string("unknown error"); }
};

inline std::uint8_t to_byte(float v) noexcept {
    if (!(v > 0.0f)) return 0;
    if (v >= 1.0f) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

} // namespace detail

/// Decodes an 8-bit (or lower) PNG of any color type into an (H, W, 3)
/// float32 tensor of byte / 255. Grayscale is replicated, palettes are
/// expanded and alpha is composited onto black. 16-bit files are rejected.
inline Tensor decode_png(std::span<const std::uint8_t> bytes) {
    detail::PngImage p;
    if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()))
        throw ImageError(ImageError::Kind::corrupt_stream, "PNG header: " + p.message());
    if (p.img.format & PNG_FORMAT_FLAG_LINEAR)
        throw ImageError(ImageError::Kind::unsupported_bit_depth, "16-bit PNG is not supported");
    if (std::uint64_t{p.img.width} * p.img.height > static_cast<std::uint64_t>(kMaxTensorElements / 3))
        throw ImageError(ImageError::Kind::corrupt_stream, "PNG dimensions too large");
    p.img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(p.img));
    if (!png_image_finish_read(&p.img, nullptr, rgb.data(), 0, nullptr))
        throw ImageError(ImageError::Kind::corrupt_stream, "PNG data: " + p.message());
    std::vector<float> out(rgb.size());
    std::transform(rgb.begin(), rgb.end(), out.begin(), [](std::uint8_t b) { return b / 255.0f; });
    return Tensor({static_cast<std::int32_t>(p.img.height), static_cast<std::int32_t>(p.img.width), 3},
                  std::move(out));
}

/// Encodes an (H, W, 3) or (H, W, 1) float tensor; values are clamped to
/// [0, 1] and rounded to the nearest of 256 levels.
inline std::vector<std::uint8_t> encode_png(const Tensor& image) {
    const auto& s = image.shape();
    if (s.size() != 3 || (s[2] != 3 && s[2] != 1))
        throw ShapeError("encode_png expects (H, W, 3) or (H, W, 1), got " + shape_str(s));
    auto src = image.data<float>();
    std::vector<std::uint8_t> pixels(src.size());
    std::transform(src.begin(), src.end(), pixels.begin(), detail::to_byte);

    detail::PngImage p;
    p.img.width = static_cast<png_uint_32>(s[1]);
    p.img.height = static_cast<png_uint_32>(s[0]);
    p.img.format = s[2] == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&p.img, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw ImageError(ImageError::Kind::encode_failed, "PNG encode: " + p.message());
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw ImageError(ImageError::Kind::encode_failed, "PNG encode: " + p.message());
    out.resize(size);
    return out;
}

inline Tensor load_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

inline void save_png(const std::filesystem::path& path, const Tensor& image) {
    write_file_bytes(path, encode_png(image));
}

} // namespace rockhunt
