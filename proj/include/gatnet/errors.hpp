#pragma once

#include <stdexcept>
#include <string>

namespace gatnet {

// Dimension or width mismatch between tensors/graphs.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid value in user-supplied data (labels out of range, overlapping masks, ...).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structural validation failure (bad edge endpoints, broken invariants).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent layer/model/run configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed binary or text file. Carries the byte offset where parsing failed.
struct FormatError : std::runtime_error {
  size_t byte_offset;
  FormatError(const std::string& msg, size_t offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
};

// API misuse: stale cache, non-deterministic loss function, mismatched state.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gatnet
