#pragma once

#include <stdexcept>
#include <string>

namespace df {

// Bad inputs: malformed configs, shape mismatches, broken manifests.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime failures: NaN/Inf in a numeric pass, I/O errors, divergence.
// The CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace df
