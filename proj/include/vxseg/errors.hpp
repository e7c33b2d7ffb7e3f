#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vxseg {

// Each error family maps onto one CLI exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value or ill-conditioned arithmetic.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Phantom placement could not satisfy the requested lesions.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A metric was requested for which no class is present.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace vxseg
