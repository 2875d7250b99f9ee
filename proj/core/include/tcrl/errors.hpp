#pragma once

#include <stdexcept>
#include <string>

namespace tcrl {

// Bad inputs, malformed files, violated preconditions. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, non-convergent iterations. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tcrl
