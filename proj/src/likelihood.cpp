#include "deepar/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "deepar/activations.hpp"
#include "deepar/error.hpp"
#include "deepar/random.hpp"
#include "deepar/special.hpp"

namespace deepar {
namespace {

// Below this count the Gamma-ratio terms are summed exactly instead of
// differenced through lgamma, which loses precision when 1/alpha is large.
constexpr double kExactSumLimit = 256.0;

// lgamma(z + r) - lgamma(r) and digamma(z + r) - digamma(r) for integer z.
void gamma_ratio(double z, double r, double& log_ratio, double& digamma_diff) {
  if (z <= kExactSumLimit) {
    log_ratio = 0.0;
    digamma_diff = 0.0;
    const auto n = static_cast<long>(z);
    for (long k = 0; k < n; ++k) {
      const double term = r + static_cast<double>(k);
      log_ratio += std::log(term);
      digamma_diff += 1.0 / term;
    }
    return;
  }
  log_ratio = log_gamma(z + r) - log_gamma(r);
  digamma_diff = digamma(z + r) - digamma(r);
}

void check_negbin_args(double z, double mu, double alpha) {
  if (!(z >= 0.0) || std::floor(z) != z || !std::isfinite(z)) {
    std::ostringstream msg;
    msg << "negative binomial target must be a non-negative integer, got " << z;
    throw DomainError(msg.str());
  }
  if (!(mu > 0.0) || !(alpha > 0.0)) {
    std::ostringstream msg;
    msg << "negative binomial requires mu > 0 and alpha > 0, got mu=" << mu
        << " alpha=" << alpha;
    throw DomainError(msg.str());
  }
}

}  // namespace

std::string_view to_string(LikelihoodKind kind) {
  return kind == LikelihoodKind::Gaussian ? "gaussian" : "negbin";
}

LikelihoodKind parse_likelihood(std::string_view name) {
  if (name == "gaussian") {
    return LikelihoodKind::Gaussian;
  }
  if (name == "negbin" || name == "negative_binomial") {
    return LikelihoodKind::NegativeBinomial;
  }
  throw ConfigError("unknown likelihood '" + std::string(name) +
                    "' (expected gaussian or negbin)");
}

NllResult gaussian_nll(double z, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    std::ostringstream msg;
    msg << "gaussian likelihood requires sigma > 0, got " << sigma;
    throw DomainError(msg.str());
  }
  const double r = z - mu;
  const double s2 = sigma * sigma;
  NllResult out;
  out.nll = 0.5 * std::log(2.0 * std::numbers::pi * s2) + r * r / (2.0 * s2);
  out.d_mu = -r / s2;
  out.d_spread = 1.0 / sigma - r * r / (s2 * sigma);
  return out;
}

double negbin_log_pmf(double z, double mu, double alpha) {
  check_negbin_args(z, mu, alpha);
  const double r = 1.0 / alpha;
  const double am = alpha * mu;
  const double log1p_am = std::log1p(am);
  double log_ratio = 0.0;
  double unused = 0.0;
  gamma_ratio(z, r, log_ratio, unused);
  double result = log_ratio - log_gamma(z + 1.0) - r * log1p_am;
  if (z > 0.0) {
    result += z * (std::log(am) - log1p_am);
  }
  return result;
}

NllResult negbin_nll(double z, double mu, double alpha) {
  check_negbin_args(z, mu, alpha);
  const double r = 1.0 / alpha;
  const double am = alpha * mu;
  const double log1p_am = std::log1p(am);
  double log_ratio = 0.0;
  double digamma_diff = 0.0;
  gamma_ratio(z, r, log_ratio, digamma_diff);

  double log_pmf = log_ratio - log_gamma(z + 1.0) - r * log1p_am;
  if (z > 0.0) {
    log_pmf += z * (std::log(am) - log1p_am);
  }
  NllResult out;
  out.nll = -log_pmf;
  out.d_mu = (mu - z) / (mu * (1.0 + am));
  out.d_spread = (digamma_diff - log1p_am) / (alpha * alpha) - (z - mu) / (alpha * (1.0 + am));
  return out;
}

NllResult nll(double z, const LikelihoodParams& params) {
  return params.kind == LikelihoodKind::Gaussian ? gaussian_nll(z, params.mu, params.spread)
                                                 : negbin_nll(z, params.mu, params.spread);
}

HeadOutput head_outputs(std::span<const double> h, const HeadParams& heads) {
  if (h.size() != heads.w_mu.cols()) {
    throw ConfigError("likelihood head expects " + std::to_string(heads.w_mu.cols()) +
                      " inputs, got " + std::to_string(h.size()));
  }
  return {dot(heads.w_mu.values(), h) + heads.b_mu[0],
          dot(heads.w_spread.values(), h) + heads.b_spread[0]};
}

LikelihoodParams scale_outputs(const HeadOutput& out, double scale, LikelihoodKind kind) {
  const double spread = std::max(softplus(out.o_spread), kParamFloor);
  if (kind == LikelihoodKind::NegativeBinomial) {
    return {kind, scale * std::max(softplus(out.o_mu), kParamFloor), spread / std::sqrt(scale)};
  }
  return {kind, scale * out.o_mu, scale * spread};
}

HeadOutput scale_outputs_grad(const HeadOutput& out, double scale, LikelihoodKind kind,
                              double d_mu, double d_spread) {
  const bool spread_floored = softplus(out.o_spread) <= kParamFloor;
  const double d_spread_raw = spread_floored ? 0.0 : softplus_grad(out.o_spread);
  if (kind == LikelihoodKind::NegativeBinomial) {
    const bool mu_floored = softplus(out.o_mu) <= kParamFloor;
    const double d_mu_raw = mu_floored ? 0.0 : softplus_grad(out.o_mu);
    return {d_mu * scale * d_mu_raw, d_spread * d_spread_raw / std::sqrt(scale)};
  }
  return {d_mu * scale, d_spread * scale * d_spread_raw};
}

LikelihoodParams apply_heads(std::span<const double> h, const HeadParams& heads, double scale,
                             LikelihoodKind kind) {
  return scale_outputs(head_outputs(h, heads), scale, kind);
}

void head_backward(std::span<const double> h, const HeadParams& heads, const HeadOutput& d_out,
                   HeadParams& grads, std::span<double> dh) {
  for (std::size_t k = 0; k < h.size(); ++k) {
    grads.w_mu[k] += d_out.o_mu * h[k];
    grads.w_spread[k] += d_out.o_spread * h[k];
    dh[k] += d_out.o_mu * heads.w_mu[k] + d_out.o_spread * heads.w_spread[k];
  }
  grads.b_mu[0] += d_out.o_mu;
  grads.b_spread[0] += d_out.o_spread;
}

double sample(const LikelihoodParams& params, Rng& rng) {
  if (params.kind == LikelihoodKind::Gaussian) {
    return rng.normal(params.mu, params.spread);
  }
  const double shape = 1.0 / params.spread;
  const double rate = rng.gamma(shape, params.spread * params.mu);
  return static_cast<double>(rng.poisson(rate));
}

}  // namespace deepar
