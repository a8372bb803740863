#pragma once

#include <stdexcept>
#include <string>

namespace kmor {

// Invalid configuration or arguments; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (factorization breakdown, rank collapse, ...);
// maps to CLI exit code 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite state during integration. Carries the failure time.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, double t)
      : NumericError(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace kmor
