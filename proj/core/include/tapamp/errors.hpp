#pragma once

#include <stdexcept>

namespace tapamp {

// Violated cost guard (tensor size, replica budget). The CLI maps this to
// exit code 3.
struct ResourceGuardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration or usage. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tapamp
