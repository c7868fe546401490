#pragma once

#include <stdexcept>
#include <string>

namespace nrg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes, or dimensions that disagree with a model config.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's domain (bad token id, empty sequence, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or mismatched file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Object used in the wrong lifecycle state (e.g. a second backward pass).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace nrg
