#pragma once

#include <stdexcept>
#include <string>

namespace frnet {

// Every failure raised by the library derives from Error so the C boundary
// can map it onto a status code with a single catch.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or volume extents disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid architecture, split, or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values surfaced during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace frnet
