// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "rockhunt/error.hpp"

namespace rockhunt {

enum class DType : std::uint8_t { float32 = 0, int8 = 1, int32 = 2 };

inline constexpr std::size_t dtype_size(DType t) noexcept {
    switch (t) {
    case DType::float32: return 4;
    case DType::int8: return 1;
    case DType::int32: return 4;
    }
    return 0;
}

inline constexpr const char* dtype_name(DType t) noexcept {
    switch (t) {
    case DType::float32: return "float32";
    case DType::int8: return "int8";
    case DType::int32: return "int32";
    }
    return "?";
}

template <class T>
inline constexpr DType dtype_of() {
    if constexpr (std::is_same_v<T, float>) return DType::float32;
    else if constexpr (std::is_same_v<T, std::int8_t>) return DType::int8;
    else {
        static_assert(std::is_same_v<T, std::int32_t>, "unsupported element type");
        return DType::int32;
    }
}

/// Tensor extents, outermost first. Images are (N, H, W, C).
using Shape = std::vector<std::int32_t>;

inline std::int64_t element_count(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

/// Affine map between reals and quanta: r = scale * (q - zero_point).
struct QuantParams {
    double scale = 1.0;
    std::int32_t zero_point = 0;

    bool operator==(const QuantParams&) const = default;
};

inline constexpr std::int32_t kInt8Min = -128;
inline constexpr std::int32_t kInt8Max = 127;

/// Rounding used everywhere in the library: ties go away from zero.
inline double round_half_away(double x) noexcept { return std::round(x); }

inline std::int32_t saturate_int8(std::int64_t v) noexcept {
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, kInt8Min, kInt8Max));
}

inline std::int32_t saturate_int32(std::int64_t v) noexcept {
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(
        v, std::numeric_limits<std::int32_t>::min(), std::numeric_limits<std::int32_t>::max()));
}

using Buffer = std::variant<std::vector<float>, std::vector<std::int8_t>, std::vector<std::int32_t>>;

inline DType buffer_dtype(const Buffer& b) noexcept { return static_cast<DType>(b.index()); }

inline std::size_t buffer_size(const Buffer& b) noexcept {
    return std::visit([](const auto& v) { return v.size(); }, b);
}

inline Buffer make_buffer(DType t, std::size_t n) {
    switch (t) {
    case DType::float32: return std::vector<float>(n, 0.0f);
    case DType::int8: return std::vector<std::int8_t>(n, 0);
    case DType::int32: return std::vector<std::int32_t>(n, 0);
    }
    throw DTypeError("unknown dtype");
}

inline void validate_qparams(const QuantParams& qp, DType t) {
    if (!(qp.scale > 0.0) || !std::isfinite(qp.scale))
        throw InvalidRangeError("quantization scale must be positive and finite");
    if (t == DType::int8 && (qp.zero_point < kInt8Min || qp.zero_point > kInt8Max))
        throw InvalidRangeError("int8 zero point out of [-128, 127]: " + std::to_string(qp.zero_point));
}

/// Immutable N-d array in row-major order. int8 tensors always carry
/// quantization parameters; float32 tensors never do.
class Tensor {
public:
    Tensor() : shape_{0}, data_(std::vector<float>{}) {}

    Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check();
    }

    Tensor(Shape shape, std::vector<std::int8_t> data, QuantParams qp)
        : shape_(std::move(shape)), data_(std::move(data)), qparams_(qp) {
        check();
    }

    Tensor(Shape shape, std::vector<std::int32_t> data, std::optional<QuantParams> qp = std::nullopt)
        : shape_(std::move(shape)), data_(std::move(data)), qparams_(qp) {
        check();
    }

    Tensor(Shape shape, Buffer data, std::optional<QuantParams> qp)
        : shape_(std::move(shape)), data_(std::move(data)), qparams_(qp) {
        check();
    }

    static Tensor zeros(Shape shape, DType t, std::optional<QuantParams> qp = std::nullopt) {
        const auto n = static_cast<std::size_t>(element_count(shape));
        Buffer b = make_buffer(t, n);
        if (t == DType::int8 && qp) {
            auto& v = std::get<std::vector<std::int8_t>>(b);
            std::fill(v.begin(), v.end(), static_cast<std::int8_t>(qp->zero_point));
        }
        return Tensor(std::move(shape), std::move(b), qp);
    }

    const Shape& shape() const noexcept { return shape_; }
    DType dtype() const noexcept { return buffer_dtype(data_); }
    const std::optional<QuantParams>& qparams() const noexcept { return qparams_; }
    std::size_t size() const noexcept { return buffer_size(data_); }
    const Buffer& buffer() const noexcept { return data_; }

    template <class T>
    std::span<const T> data() const {
        if (dtype() != dtype_of<T>())
            throw DTypeError(std::string("tensor holds ") + dtype_name(dtype()) + ", requested " +
                             dtype_name(dtype_of<T>()));
        return std::get<std::vector<T>>(data_);
    }

    /// Same elements under a different shape (element count must agree).
    Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_, qparams_); }

    bool operator==(const Tensor&) const = default;

private:
    void check() const {
        for (auto d : shape_)
            if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape_));
        if (element_count(shape_) != static_cast<std::int64_t>(size()))
            throw ShapeError("shape " + shape_str(shape_) + " does not match " + std::to_string(size()) +
                             " elements");
        switch (dtype()) {
        case DType::float32:
            if (qparams_) throw DTypeError("float32 tensor must not carry quantization parameters");
            break;
        case DType::int8:
            if (!qparams_) throw DTypeError("int8 tensor requires quantization parameters");
            validate_qparams(*qparams_, DType::int8);
            break;
        case DType::int32:
            if (qparams_) validate_qparams(*qparams_, DType::int32);
            break;
        }
    }

    Shape shape_;
    Buffer data_;
    std::optional<QuantParams> qparams_;
};

/// Per-tensor asymmetric int8 parameters covering [min_val, max_val].
///
/// The range is first widened to include 0 so that real zero is exactly
/// representable. Constant (degenerate) ranges get scale 1 / zero point 0,
/// or max(|max_val|, 1) / 127 when the constant is non-zero.
inline QuantParams compute_qparams(double min_val, double max_val) {
    if (!std::isfinite(min_val) || !std::isfinite(max_val))
        throw InvalidRangeError("quantization range must be finite");
    if (min_val > max_val) throw InvalidRangeError("quantization range has min > max");

    const double lo = std::min(min_val, 0.0);
    const double hi = std::max(max_val, 0.0);
    if (lo == hi) {
        const double scale = max_val != 0.0 ? std::max(std::abs(max_val), 1.0) / 127.0 : 1.0;
        return {scale, 0};
    }
    const double scale = (hi - lo) / 255.0;
    // lo * 255 / (hi - lo) rather than lo / scale: keeps symmetric ranges
    // on an exact half so (-1, 1) lands on zero point 0.
    const double steps_below_zero = lo * 255.0 / (hi - lo);
    const auto zp = saturate_int8(static_cast<std::int64_t>(-128.0 - round_half_away(steps_below_zero)));
    return {scale, zp};
}

inline std::int8_t quantize_value(double x, const QuantParams& qp) noexcept {
    if (std::isnan(x)) return static_cast<std::int8_t>(qp.zero_point);
    const double q = round_half_away(x / qp.scale) + qp.zero_point;
    return static_cast<std::int8_t>(std::clamp(q, double(kInt8Min), double(kInt8Max)));
}

inline float dequantize_value(std::int32_t q, const QuantParams& qp) noexcept {
    return static_cast<float>(qp.scale * (q - qp.zero_point));
}

/// Saturating affine quantization of a float32 tensor. NaN maps to the zero point.
inline Tensor quantize(const Tensor& t, const QuantParams& qp) {
    validate_qparams(qp, DType::int8);
    auto src = t.data<float>();
    std::vector<std::int8_t> out(src.size());
    std::transform(src.begin(), src.end(), out.begin(), [&](float x) { return quantize_value(x, qp); });
    return Tensor(t.shape(), std::move(out), qp);
}

inline Tensor dequantize(const Tensor& t) {
    auto src = t.data<std::int8_t>();
    const auto& qp = *t.qparams();
    std::vector<float> out(src.size());
    std::transform(src.begin(), src.end(), out.begin(), [&](std::int8_t q) { return dequantize_value(q, qp); });
    return Tensor(t.shape(), std::move(out));
}

/// Dequantize under explicit parameters (overrides whatever the tensor carries).
inline Tensor dequantize(const Tensor& t, const QuantParams& qp) {
    return dequantize(Tensor(t.shape(), std::vector<std::int8_t>(t.data<std::int8_t>().begin(),
                                                                 t.data<std::int8_t>().end()),
                             qp));
}

} // namespace rockhunt
