#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsae {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or precondition violation (shape mismatch, out-of-range index).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A time stepper produced a non-finite or runaway state.
class IntegrationDiverged : public NumericError {
 public:
  IntegrationDiverged(std::size_t step, const std::string& what)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsae
