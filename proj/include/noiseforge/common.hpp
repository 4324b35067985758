#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace noiseforge {

using ClassId = std::uint32_t;

/// Number of concentration intervals per class.
inline constexpr std::size_t kIntervals = 5;

/// Version of the RGNF binary feature format written by this build.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

/// Base class for every error raised by the toolkit. The kind maps onto the
/// CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Kind { config, data, validation };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Invalid user configuration (flags, config file, parameter ranges).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

/// Malformed or inconsistent input data: bad magic, truncated payloads,
/// duplicate indices, out-of-range labels, non-finite values.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::data, what) {}
};

/// Distance sums that make a concentration ratio undefined.
class DegenerateGeometryError : public DataError {
 public:
  explicit DegenerateGeometryError(const std::string& what) : DataError(what) {}
};

/// A post-condition check (closure, determinism) failed.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(Kind::validation, what) {}
};

}  // namespace noiseforge
