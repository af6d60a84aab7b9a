// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rockhunt {

/// Base class of every error thrown by the library. The CLI maps these to
/// exit code 1 ("domain error").
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable quantization range.
class InvalidRangeError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes (or element counts) that do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Tensor dtype that a kernel or graph does not accept.
class DTypeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to a pipeline stage (empty inputs, bad ratios, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Quantizer refused its input graph.
class QuantizeError : public Error {
public:
    using Error::Error;
};

/// Image decode/encode failure.
class ImageError : public Error {
public:
    enum class Kind { corrupt_stream, unsupported_bit_depth, encode_failed };

    ImageError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Malformed annotation file; carries the 1-based line number.
class LabelError : public Error {
public:
    LabelError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Evaluation harness misuse (length mismatch, unknown label, empty matrix).
class EvalError : public Error {
public:
    using Error::Error;
};

} // namespace rockhunt
