#pragma once

#include <stdexcept>
#include <string>

namespace mmsd {

/// Bad input: wrong shape, out-of-range value, illegal combination.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed file (missing column, bad header, truncated payload).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Something the host must provide is missing (an executable, a writable dir).
class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training or evaluation went numerically wrong.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace mmsd
