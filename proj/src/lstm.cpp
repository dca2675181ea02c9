#include "deepar/lstm.hpp"

#include <cmath>
#include <string>

#include "deepar/activations.hpp"
#include "deepar/error.hpp"
#include "deepar/random.hpp"

namespace deepar {
namespace {

void check_shapes(std::span<const double> x, const LayerState& state,
                  const LstmLayerParams& params) {
  if (x.size() != params.input_dim || state.h.size() != params.hidden_dim ||
      state.c.size() != params.hidden_dim) {
    throw ConfigError("lstm: input of size " + std::to_string(x.size()) + " / state of size " +
                      std::to_string(state.h.size()) + " does not match layer " +
                      std::to_string(params.input_dim) + "->" +
                      std::to_string(params.hidden_dim));
  }
}

// Pre-activations W_x x + W_h h + b followed by the gate nonlinearities.
void compute_gates(std::span<const double> x, std::span<const double> h_prev,
                   const LstmLayerParams& params, std::vector<double>& gates) {
  const std::size_t hidden = params.hidden_dim;
  gates.assign(params.bias.values().begin(), params.bias.values().end());
  gemv_acc(params.w_input, x, gates);
  gemv_acc(params.w_recurrent, h_prev, gates);
  for (std::size_t k = 0; k < hidden; ++k) {
    gates[k] = sigmoid(gates[k]);
    gates[hidden + k] = sigmoid(gates[hidden + k]);
    gates[2 * hidden + k] = std::tanh(gates[2 * hidden + k]);
    gates[3 * hidden + k] = sigmoid(gates[3 * hidden + k]);
  }
}

}  // namespace

LstmLayerParams::LstmLayerParams(std::size_t input, std::size_t hidden)
    : input_dim(input),
      hidden_dim(hidden),
      w_input(4 * hidden, input),
      w_recurrent(4 * hidden, hidden),
      bias(4 * hidden, 1) {}

LstmLayerParams LstmLayerParams::initialized(std::size_t input, std::size_t hidden, Rng& rng) {
  LstmLayerParams p(input, hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input + hidden));
  for (double& w : p.w_input.values()) {
    w = bound * (2.0 * rng.uniform() - 1.0);
  }
  for (double& w : p.w_recurrent.values()) {
    w = bound * (2.0 * rng.uniform() - 1.0);
  }
  for (std::size_t k = 0; k < hidden; ++k) {
    p.bias[hidden + k] = kForgetBias;
  }
  return p;
}

void LstmLayerParams::set_zero() {
  w_input.fill(0.0);
  w_recurrent.fill(0.0);
  bias.fill(0.0);
}

LstmCache lstm_forward(std::span<const double> x, LayerState& state,
                       const LstmLayerParams& params) {
  check_shapes(x, state, params);
  const std::size_t hidden = params.hidden_dim;
  LstmCache cache;
  cache.x.assign(x.begin(), x.end());
  cache.h_prev = state.h;
  cache.c_prev = state.c;
  compute_gates(x, state.h, params, cache.gates);
  cache.c.resize(hidden);
  cache.tanh_c.resize(hidden);
  cache.h.resize(hidden);
  const double* g = cache.gates.data();
  for (std::size_t k = 0; k < hidden; ++k) {
    cache.c[k] = g[hidden + k] * cache.c_prev[k] + g[k] * g[2 * hidden + k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = g[3 * hidden + k] * cache.tanh_c[k];
  }
  state.h = cache.h;
  state.c = cache.c;
  return cache;
}

void lstm_step(std::span<const double> x, LayerState& state, const LstmLayerParams& params,
               std::vector<double>& scratch) {
  check_shapes(x, state, params);
  const std::size_t hidden = params.hidden_dim;
  compute_gates(x, state.h, params, scratch);
  const double* g = scratch.data();
  for (std::size_t k = 0; k < hidden; ++k) {
    state.c[k] = g[hidden + k] * state.c[k] + g[k] * g[2 * hidden + k];
    state.h[k] = g[3 * hidden + k] * std::tanh(state.c[k]);
  }
}

LstmInputGrads lstm_backward(const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, const LstmLayerParams& params,
                             LstmLayerParams& grads) {
  const std::size_t hidden = params.hidden_dim;
  if (dh.size() != hidden || dc.size() != hidden || cache.h.size() != hidden ||
      cache.x.size() != params.input_dim || !grads.w_input.same_shape(params.w_input)) {
    throw ConfigError("lstm_backward: gradient or cache shape does not match the layer");
  }
  const double* g = cache.gates.data();
  std::vector<double> d_pre(4 * hidden);
  LstmInputGrads out;
  out.dc_prev.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double i = g[k];
    const double f = g[hidden + k];
    const double cand = g[2 * hidden + k];
    const double o = g[3 * hidden + k];
    const double tc = cache.tanh_c[k];
    const double dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
    d_pre[k] = dc_total * cand * i * (1.0 - i);
    d_pre[hidden + k] = dc_total * cache.c_prev[k] * f * (1.0 - f);
    d_pre[2 * hidden + k] = dc_total * i * (1.0 - cand * cand);
    d_pre[3 * hidden + k] = dh[k] * tc * o * (1.0 - o);
    out.dc_prev[k] = dc_total * f;
  }
  outer_acc(grads.w_input, d_pre, cache.x);
  outer_acc(grads.w_recurrent, d_pre, cache.h_prev);
  for (std::size_t r = 0; r < 4 * hidden; ++r) {
    grads.bias[r] += d_pre[r];
  }
  out.dx.assign(params.input_dim, 0.0);
  gemv_t_acc(params.w_input, d_pre, out.dx);
  out.dh_prev.assign(hidden, 0.0);
  gemv_t_acc(params.w_recurrent, d_pre, out.dh_prev);
  return out;
}

}  // namespace deepar
