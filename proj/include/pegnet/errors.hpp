#ifndef PEGNET_ERRORS_HPP_
#define PEGNET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pegnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed topology: out-of-range cell index, degenerate cell.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Index or label outside its allowed range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Tensor/array dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated, or inconsistent file on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced, or a numerical stability bound violated.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pegnet

#endif  // PEGNET_ERRORS_HPP_
