#pragma once

#include <cmath>

namespace deepar {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow for large x or underflow to 0 for moderate negative x.
inline double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

// d softplus / dx
inline double softplus_grad(double x) { return sigmoid(x); }

}  // namespace deepar
