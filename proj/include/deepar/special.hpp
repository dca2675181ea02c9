#pragma once

namespace deepar {

// Lanczos (g = 7, 9 terms). Requires x > 0.
double log_gamma(double x);

// Upward recurrence to x >= 6, then the asymptotic series. Requires x > 0.
double digamma(double x);

struct LogGammaDigamma {
  double lgamma;
  double digamma;
};

LogGammaDigamma lgamma_digamma(double x);

}  // namespace deepar
