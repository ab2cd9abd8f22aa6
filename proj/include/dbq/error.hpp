#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dbq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A recursive filter produced a non-finite sample.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, std::size_t index)
      : Error(what + " (sample " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Frequency-response denominator collapsed below the guard epsilon.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Malformed document, manifest or flag. Carries the offending field name.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Reverse pass produced a non-finite value.
class NonFiniteGradient : public Error {
 public:
  NonFiniteGradient(const std::string& param, std::size_t index)
      : Error("non-finite gradient for parameter " + param), param_(param), index_(index) {}
  const std::string& param() const noexcept { return param_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string param_;
  std::size_t index_;
};

}  // namespace dbq
