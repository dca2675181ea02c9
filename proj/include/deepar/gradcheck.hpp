#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepar/matrix.hpp"

namespace deepar {

struct ParamBlock {
  std::string name;
  Matrix* value = nullptr;
};

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double max_relative_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
};

// Central: (f(p+h) - f(p-h)) / 2h.
// FourthOrder: (8 (f(p+h) - f(p-h)) - (f(p+2h) - f(p-2h))) / 12h, whose
// truncation error is O(h^4) and so tolerates a larger h, keeping roundoff
// below the size of small gradient entries.
enum class FiniteDiffScheme { Central, FourthOrder };

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares `analytic` (one matrix per block) against central differences of
// `loss`, perturbing each entry of each block by +-step in place. `loss` must
// read the blocks through the pointers; throws ConfigError if two evaluations
// at the same point disagree.
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamBlock> params,
                                  std::span<const Matrix> analytic, double tolerance,
                                  double step = 1e-6,
                                  FiniteDiffScheme scheme = FiniteDiffScheme::Central);

}  // namespace deepar
