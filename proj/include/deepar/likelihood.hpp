#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "deepar/matrix.hpp"

namespace deepar {

class Rng;

enum class LikelihoodKind : std::uint8_t { Gaussian = 0, NegativeBinomial = 1 };

std::string_view to_string(LikelihoodKind kind);
LikelihoodKind parse_likelihood(std::string_view name);

// Lower bound applied to sigma (Gaussian) and to mu, alpha (negative
// binomial) after the softplus and before the scale factor is applied.
inline constexpr double kParamFloor = 1e-6;

// Distribution parameters at one time step. `spread` is sigma for the
// Gaussian and the shape alpha for the negative binomial, where
// Var[z] = mu + mu^2 alpha.
struct LikelihoodParams {
  LikelihoodKind kind = LikelihoodKind::Gaussian;
  double mu = 0.0;
  double spread = 1.0;

  friend bool operator==(const LikelihoodParams&, const LikelihoodParams&) = default;
};

struct NllResult {
  double nll = 0.0;
  double d_mu = 0.0;
  double d_spread = 0.0;
};

NllResult gaussian_nll(double z, double mu, double sigma);
NllResult negbin_nll(double z, double mu, double alpha);
double negbin_log_pmf(double z, double mu, double alpha);
NllResult nll(double z, const LikelihoodParams& params);

// One affine map per distribution parameter on top of the network output.
struct HeadParams {
  Matrix w_mu;      // 1 x H
  Matrix b_mu;      // 1 x 1
  Matrix w_spread;  // 1 x H, sigma or alpha head
  Matrix b_spread;  // 1 x 1

  HeadParams() = default;
  explicit HeadParams(std::size_t hidden)
      : w_mu(1, hidden), b_mu(1, 1), w_spread(1, hidden), b_spread(1, 1) {}
  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct HeadOutput {
  double o_mu = 0.0;
  double o_spread = 0.0;
};

HeadOutput head_outputs(std::span<const double> h, const HeadParams& heads);

// Negative binomial: mu = nu softplus(o_mu), alpha = softplus(o_alpha) / sqrt(nu).
// Gaussian:          mu = nu o_mu,           sigma = nu softplus(o_sigma).
LikelihoodParams scale_outputs(const HeadOutput& out, double scale, LikelihoodKind kind);

// Chain rule through scale_outputs: (dL/dmu, dL/dspread) -> dL/do.
HeadOutput scale_outputs_grad(const HeadOutput& out, double scale, LikelihoodKind kind,
                              double d_mu, double d_spread);

LikelihoodParams apply_heads(std::span<const double> h, const HeadParams& heads, double scale,
                             LikelihoodKind kind);

// Accumulates head parameter gradients and adds dL/dh into `dh`.
void head_backward(std::span<const double> h, const HeadParams& heads, const HeadOutput& d_out,
                   HeadParams& grads, std::span<double> dh);

// Gaussian via Box-Muller; negative binomial as a Poisson with a
// Gamma(1/alpha, alpha mu) distributed rate.
double sample(const LikelihoodParams& params, Rng& rng);

}  // namespace deepar
