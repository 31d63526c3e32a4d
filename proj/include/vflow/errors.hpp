#pragma once

#include <stdexcept>
#include <string>

namespace vflow {

/// Bad caller input: dimension mismatch, point outside a set, invalid parameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A requested capability is not available (e.g. unknown fixed-point set).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure stopped before reaching its tolerance.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_gap)
      : std::runtime_error(what), last_gap_(last_gap) {}
  double last_gap() const noexcept { return last_gap_; }

 private:
  double last_gap_;
};

}  // namespace vflow
