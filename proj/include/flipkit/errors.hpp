#pragma once

#include <stdexcept>
#include <string>

namespace flipkit {

// Precondition violations and invalid values. CLI maps these to exit code 2.
class domain_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed files / documents. CLI maps these to exit code 2.
class parse_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical non-convergence or inconclusive extraction. CLI exit code 3.
class numerics_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flipkit
