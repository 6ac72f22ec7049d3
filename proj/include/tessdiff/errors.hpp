#pragma once

#include <stdexcept>
#include <string>

namespace tessdiff {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input points cannot span a d-simplex (too few, coincident, or affinely dependent).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A numerical invariant that the algorithms guarantee was found violated.
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string invariant, const std::string& detail)
      : Error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed particle data file.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace tessdiff
