#pragma once

#include <stdexcept>
#include <string>

namespace dghif {

/// Root of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the named operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain of a function (log of a non-positive
/// number, division by zero, label outside {0,1}, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unknown configuration key/value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: out-of-range ids, empty collections, bad files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not allow the call.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dghif
