#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "homoenc/adiff/tape.hpp"
#include "homoenc/errors.hpp"

namespace homoenc::ad {

/// A finite-difference probe produced a non-finite value.
class GradCheckError : public Error {
 public:
  GradCheckError(std::size_t leaf, const std::string& what)
      : Error("grad_check: leaf " + std::to_string(leaf) + ": " + what), leaf_(leaf) {}
  std::size_t leaf() const noexcept { return leaf_; }

 private:
  std::size_t leaf_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_leaf = 0;
};

/// Compares reverse-mode gradients of `output` at `point` (one value per leaf)
/// against central differences with step h. The error for a leaf is
/// |autodiff - fd| / max(1, |fd|). The tape is left evaluated at `point`.
GradCheckResult grad_check(Tape& tape, Var output, std::span<const double> point,
                           double h = 1e-4);

}  // namespace homoenc::ad
