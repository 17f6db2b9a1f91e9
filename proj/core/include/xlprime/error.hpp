#pragma once

#include <stdexcept>
#include <string>

namespace xlp {

/// Error classes map one-to-one onto the CLI exit codes.
enum class ErrorKind { config, data, numeric, interrupted };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class InterruptedError : public Error {
 public:
  explicit InterruptedError(const std::string& what) : Error(ErrorKind::interrupted, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace xlp
