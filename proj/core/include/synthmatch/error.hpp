#pragma once

#include <stdexcept>
#include <string>

namespace synthmatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input supplied by the caller: malformed files, out-of-range values,
/// unknown identifiers. The CLI maps these to exit code 1.
class UserError : public Error {
 public:
  using Error::Error;
};

/// Tensor or array shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace synthmatch
