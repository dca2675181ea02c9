#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepar/dataset.hpp"
#include "deepar/gradcheck.hpp"
#include "deepar/likelihood.hpp"
#include "deepar/lstm.hpp"
#include "deepar/matrix.hpp"

namespace deepar {

class Rng;

struct ModelArchitecture {
  LikelihoodKind likelihood = LikelihoodKind::Gaussian;
  WindowSpec window;
  Granularity granularity = Granularity::Daily;
  std::size_t covariate_dim = 0;
  std::size_t num_categories = 1;
  std::size_t embedding_dim = 0;
  std::size_t hidden_units = 40;
  std::size_t num_layers = 3;
  bool use_scaling = true;

  // lagged target + covariates + category embedding
  std::size_t input_dim() const { return 1 + covariate_dim + embedding_dim; }
  friend bool operator==(const ModelArchitecture&, const ModelArchitecture&) = default;
};

// The single global parameter set shared by all series, together with what
// is needed to rebuild inputs at prediction time.
struct ModelParams {
  ModelArchitecture arch;
  Standardizer standardizer;
  Matrix embedding;  // num_categories x embedding_dim
  std::vector<LstmLayerParams> layers;
  HeadParams head;

  static ModelParams initialized(const ModelArchitecture& arch, Standardizer standardizer,
                                 Rng& rng);
  // Same shapes, every parameter zero; used as a gradient accumulator.
  ModelParams zeros_like() const;

  std::vector<ParamBlock> blocks();
  std::vector<Matrix*> block_pointers();
  std::vector<const Matrix*> block_pointers() const;
  std::size_t parameter_count() const;
  void add(const ModelParams& other);
  void scale_by(double factor);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// [z_{t-1} / nu, x_t, embedding(category)]
std::vector<double> step_input(const TrainingWindow& window, std::size_t t, double previous_target,
                               const ModelParams& params);

// Runs the stacked LSTM for one step and returns the likelihood parameters.
LikelihoodParams forward_step(const ModelParams& params, LstmState& state,
                              std::span<const double> input, double scale,
                              std::vector<double>& scratch);

struct UnrollResult {
  double loss = 0.0;        // summed negative log-likelihood
  std::size_t terms = 0;    // steps contributing to the loss
  std::vector<LikelihoodParams> theta;
  ModelParams gradient;     // empty unless requested
};

// Teacher-forced pass over the whole window. Observed and padded steps enter
// the loss; missing steps are skipped and, as inputs to the next step,
// replaced by a draw from that step's predictive distribution using `rng`.
UnrollResult unroll_training(const TrainingWindow& window, const ModelParams& params, Rng& rng,
                             bool compute_gradient = true);

struct EncodeResult {
  LstmState state;
  double last_value = 0.0;  // z_{t0-1} as fed to the first prediction step
};

// Runs the recurrence over the first `window.conditioning_length` steps.
EncodeResult encode(const TrainingWindow& window, const ModelParams& params, Rng& rng);

}  // namespace deepar
