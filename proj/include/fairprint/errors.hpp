#pragma once

#include <stdexcept>
#include <string>

namespace fairprint {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, violated data invariants, invalid
// configuration values. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numeric failures: out-of-domain arguments, degenerate statistics,
// non-convergent iterations. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Command-line misuse. CLI exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairprint
