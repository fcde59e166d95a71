#pragma once

#include <stdexcept>
#include <string>

namespace segkit {

// Bad input data or configuration; the CLI maps this to exit code 2.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Everything else (IO failures, numeric blow-ups); exit code 1.
class runtime_failure : public std::runtime_error {
 public:
  explicit runtime_failure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace segkit
