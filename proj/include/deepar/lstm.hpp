#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepar/matrix.hpp"

namespace deepar {

class Rng;

inline constexpr double kForgetBias = 1.0;

// One LSTM layer. The four gates are stacked row-wise in the order
// input, forget, candidate, output: rows [k*H, (k+1)*H) belong to gate k.
struct LstmLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w_input;      // 4H x input_dim
  Matrix w_recurrent;  // 4H x H
  Matrix bias;         // 4H x 1

  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input, std::size_t hidden);

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, forget bias 1.
  static LstmLayerParams initialized(std::size_t input, std::size_t hidden, Rng& rng);

  void set_zero();
  friend bool operator==(const LstmLayerParams&, const LstmLayerParams&) = default;
};

struct LayerState {
  std::vector<double> h;
  std::vector<double> c;

  LayerState() = default;
  explicit LayerState(std::size_t hidden) : h(hidden, 0.0), c(hidden, 0.0) {}
  friend bool operator==(const LayerState&, const LayerState&) = default;
};

// State of a stacked LSTM, one entry per layer.
struct LstmState {
  std::vector<LayerState> layers;

  LstmState() = default;
  LstmState(std::size_t num_layers, std::size_t hidden)
      : layers(num_layers, LayerState(hidden)) {}
  friend bool operator==(const LstmState&, const LstmState&) = default;
};

// Everything the backward pass of one cell step needs.
struct LstmCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> gates;   // activated gates, 4H, same order as the weights
  std::vector<double> c;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

struct LstmInputGrads {
  std::vector<double> dx;
  std::vector<double> dh_prev;
  std::vector<double> dc_prev;
};

// Runs one cell step; `state` is replaced with the new (h, c).
LstmCache lstm_forward(std::span<const double> x, LayerState& state,
                       const LstmLayerParams& params);

// Forward step without keeping a cache (prediction path).
void lstm_step(std::span<const double> x, LayerState& state, const LstmLayerParams& params,
               std::vector<double>& scratch);

// Gradients of one cell step. dh and dc are the upstream gradients on the
// step's output h and c. Parameter gradients are accumulated into `grads`.
LstmInputGrads lstm_backward(const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, const LstmLayerParams& params,
                             LstmLayerParams& grads);

}  // namespace deepar
