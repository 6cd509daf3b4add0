#pragma once

#include <stdexcept>
#include <string>

namespace hfur {

/// Shape or dimension mismatch; message names the offending axes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value (bad factor, qp out of range, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Work item exceeds an engine resource bound (e.g. attention token limit).
struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File I/O failure or malformed file contents.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API contract violation (non-scalar loss, unpadded dims, ...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hfur
