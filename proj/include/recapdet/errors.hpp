#pragma once

#include <stdexcept>
#include <string>

namespace recapdet {

// Error taxonomy used across the library. Everything derives from
// std::runtime_error so callers can catch broadly or per-kind.

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct DimensionError : ShapeError {
  explicit DimensionError(const std::string& msg) : ShapeError(msg) {}
};

struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error("input error: " + msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error("usage error: " + msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error("i/o error: " + msg) {}
};

// Metric is mathematically undefined for the given inputs (e.g. AUC with a
// single class present).
struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& msg)
      : std::runtime_error("undefined metric: " + msg) {}
};

struct TrainingDivergenceError : std::runtime_error {
  explicit TrainingDivergenceError(const std::string& msg)
      : std::runtime_error("training divergence: " + msg) {}
};

}  // namespace recapdet
