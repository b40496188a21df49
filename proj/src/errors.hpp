#pragma once

#include <stdexcept>
#include <string>

namespace kgen {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not conform to an op's rule.
struct ShapeError : Error {
  using Error::Error;
};

// forward_op was asked for an op outside the supported set.
struct UnknownOpError : Error {
  using Error::Error;
};

// Tape misuse: backward on a consumed tape, non-scalar loss, etc.
struct TapeError : Error {
  using Error::Error;
};

// Bad input files or malformed records. CLI maps this to exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Bad configuration or command usage. CLI maps this to exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace kgen
