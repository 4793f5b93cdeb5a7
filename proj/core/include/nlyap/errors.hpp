#pragma once

#include <stdexcept>
#include <string>

namespace nlyap {

/// Precondition violated by the caller (bad dimension, bad parameter range).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlyap
