#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepar/matrix.hpp"

namespace deepar {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  AdamState() = default;
  // Moments shaped like `params`.
  AdamState(AdamOptions opts, std::span<const Matrix* const> params);
};

// One bias-corrected Adam update. Throws NumericError and leaves everything
// untouched if any gradient entry is not finite.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state);

// Rescales the gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

}  // namespace deepar
