#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace perpetual {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed expression text; offset is a byte position into the source.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse error at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Argument outside the mathematical domain (log of a non-positive number, pole of gamma, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnboundParameter : public Error {
 public:
  explicit UnboundParameter(const std::string& name)
      : Error("unbound parameter '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// Iteration budget exhausted, breakdown of a solver, NaN in a lattice, ...
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration (bad parameter ranges, inconsistent specs).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The requested evaluation route does not exist for this problem.
class UnavailableMethod : public Error {
 public:
  using Error::Error;
};

}  // namespace perpetual
