#pragma once

#include <stdexcept>
#include <string>

namespace bfav {

// Malformed input files, bad JSON, unreadable paths.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Layer dimension mismatches.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Integer parameters outside the quantization range, bad bit positions,
// out-of-range parameter ids.
struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (degenerate layers, bad region, unsupported ops).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bfav
