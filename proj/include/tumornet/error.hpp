#pragma once

#include <stdexcept>
#include <string>

namespace tumornet {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or layer wiring.
class ShapeError : public Error {
public:
  using Error::Error;
};

// NaN/Inf produced or consumed by a kernel, or a degenerate statistic.
class NumericError : public Error {
public:
  using Error::Error;
};

// Dataset layout, decode, or split problems.
class DataError : public Error {
public:
  using Error::Error;
};

// Invalid configuration value or unknown key.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg, std::string key = {})
      : Error(msg), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

// Loss became non-finite during training.
class DivergenceError : public Error {
public:
  using Error::Error;
};

// Checkpoint class names disagree with the dataset being evaluated.
class ClassMismatchError : public Error {
public:
  using Error::Error;
};

class CheckpointError : public Error {
public:
  enum class Kind { Io, Format, Version, Truncated, ShapeTable, Checksum };

  CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

} // namespace tumornet
