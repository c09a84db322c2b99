#pragma once

#include <stdexcept>
#include <string>

namespace fedblock {

/// Base of every error raised by the library. `category()` is a short stable
/// tag the CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "shape"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "domain"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "numerical"; }
};

class IntegrityError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "integrity"; }
};

class RegistryError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "registry"; }
};

// Raised when every aggregation weight is zero. The contract has already
// frozen the global model and emptied the queue by the time this escapes.
class DegenerateAggregationError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "degenerate"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "io"; }
};

}  // namespace fedblock
