#include "deepar/network.hpp"

#include <cmath>
#include <sstream>

#include "deepar/error.hpp"
#include "deepar/random.hpp"

namespace deepar {

ModelParams ModelParams::initialized(const ModelArchitecture& arch, Standardizer standardizer,
                                     Rng& rng) {
  arch.window.validate();
  if (arch.num_layers < 1 || arch.hidden_units < 1 || arch.num_categories < 1) {
    throw ConfigError("model needs at least one layer, one hidden unit and one category");
  }
  if (standardizer.mean.size() != arch.covariate_dim) {
    throw ConfigError("standardizer does not match the covariate dimension");
  }
  ModelParams p;
  p.arch = arch;
  p.standardizer = std::move(standardizer);
  p.embedding = Matrix(arch.num_categories, arch.embedding_dim);
  if (arch.embedding_dim > 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.embedding_dim));
    for (double& v : p.embedding.values()) {
      v = bound * (2.0 * rng.uniform() - 1.0);
    }
  }
  std::size_t input = arch.input_dim();
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    p.layers.push_back(LstmLayerParams::initialized(input, arch.hidden_units, rng));
    input = arch.hidden_units;
  }
  p.head = HeadParams(arch.hidden_units);
  const double bound = 1.0 / std::sqrt(static_cast<double>(arch.hidden_units));
  for (Matrix* m : {&p.head.w_mu, &p.head.w_spread}) {
    for (double& v : m->values()) {
      v = bound * (2.0 * rng.uniform() - 1.0);
    }
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Matrix* m : z.block_pointers()) {
    m->fill(0.0);
  }
  return z;
}

std::vector<ParamBlock> ModelParams::blocks() {
  std::vector<ParamBlock> out;
  out.push_back({"embedding", &embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    out.push_back({prefix + "w_input", &layers[l].w_input});
    out.push_back({prefix + "w_recurrent", &layers[l].w_recurrent});
    out.push_back({prefix + "bias", &layers[l].bias});
  }
  out.push_back({"head.w_mu", &head.w_mu});
  out.push_back({"head.b_mu", &head.b_mu});
  out.push_back({"head.w_spread", &head.w_spread});
  out.push_back({"head.b_spread", &head.b_spread});
  return out;
}

std::vector<Matrix*> ModelParams::block_pointers() {
  std::vector<Matrix*> out;
  for (const auto& b : blocks()) {
    out.push_back(b.value);
  }
  return out;
}

std::vector<const Matrix*> ModelParams::block_pointers() const {
  auto* self = const_cast<ModelParams*>(this);
  std::vector<const Matrix*> out;
  for (Matrix* m : self->block_pointers()) {
    out.push_back(m);
  }
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : block_pointers()) {
    n += m->size();
  }
  return n;
}

void ModelParams::add(const ModelParams& other) {
  auto mine = block_pointers();
  const auto theirs = other.block_pointers();
  for (std::size_t b = 0; b < mine.size(); ++b) {
    auto dst = mine[b]->values();
    const auto src = theirs[b]->values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += src[i];
    }
  }
}

void ModelParams::scale_by(double factor) {
  for (Matrix* m : block_pointers()) {
    for (double& v : m->values()) {
      v *= factor;
    }
  }
}

std::vector<double> step_input(const TrainingWindow& window, std::size_t t, double previous_target,
                               const ModelParams& params) {
  const auto& arch = params.arch;
  if (window.covariates.cols() != arch.covariate_dim) {
    throw ConfigError("window has " + std::to_string(window.covariates.cols()) +
                      " covariates, model expects " + std::to_string(arch.covariate_dim));
  }
  if (window.category >= arch.num_categories) {
    throw ConfigError("category " + std::to_string(window.category) +
                      " is outside the model's " + std::to_string(arch.num_categories) +
                      " categories");
  }
  std::vector<double> input;
  input.reserve(arch.input_dim());
  input.push_back(t == 0 ? 0.0 : previous_target / window.scale);
  const auto cov = window.covariates.row(t);
  input.insert(input.end(), cov.begin(), cov.end());
  if (arch.embedding_dim > 0) {
    const auto emb = params.embedding.row(window.category);
    input.insert(input.end(), emb.begin(), emb.end());
  }
  return input;
}

LikelihoodParams forward_step(const ModelParams& params, LstmState& state,
                              std::span<const double> input, double scale,
                              std::vector<double>& scratch) {
  lstm_step(input, state.layers[0], params.layers[0], scratch);
  for (std::size_t l = 1; l < params.layers.size(); ++l) {
    lstm_step(state.layers[l - 1].h, state.layers[l], params.layers[l], scratch);
  }
  return apply_heads(state.layers.back().h, params.head, scale, params.arch.likelihood);
}

namespace {

[[noreturn]] void throw_non_finite(std::size_t t, const LikelihoodParams& theta, double z) {
  std::ostringstream msg;
  msg << "non-finite loss at window step " << t << " (z=" << z << ", mu=" << theta.mu
      << ", " << (theta.kind == LikelihoodKind::Gaussian ? "sigma" : "alpha") << "="
      << theta.spread << ")";
  throw NumericError(msg.str());
}

}  // namespace

UnrollResult unroll_training(const TrainingWindow& window, const ModelParams& params, Rng& rng,
                             bool compute_gradient) {
  const std::size_t steps = window.length();
  const std::size_t num_layers = params.layers.size();
  const std::size_t hidden = params.arch.hidden_units;
  const LikelihoodKind kind = params.arch.likelihood;

  UnrollResult result;
  result.theta.reserve(steps);
  LstmState state(num_layers, hidden);

  // caches[t][l]
  std::vector<std::vector<LstmCache>> caches;
  std::vector<HeadOutput> outputs;
  std::vector<NllResult> terms;
  if (compute_gradient) {
    caches.resize(steps);
    outputs.resize(steps);
    terms.resize(steps);
  }
  std::vector<double> scratch;

  double previous = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto input = step_input(window, t, previous, params);
    const HeadOutput* head_out = nullptr;
    HeadOutput out_value;
    if (compute_gradient) {
      caches[t].reserve(num_layers);
      caches[t].push_back(lstm_forward(input, state.layers[0], params.layers[0]));
      for (std::size_t l = 1; l < num_layers; ++l) {
        caches[t].push_back(lstm_forward(caches[t][l - 1].h, state.layers[l], params.layers[l]));
      }
      outputs[t] = head_outputs(state.layers.back().h, params.head);
      head_out = &outputs[t];
    } else {
      lstm_step(input, state.layers[0], params.layers[0], scratch);
      for (std::size_t l = 1; l < num_layers; ++l) {
        lstm_step(state.layers[l - 1].h, state.layers[l], params.layers[l], scratch);
      }
      out_value = head_outputs(state.layers.back().h, params.head);
      head_out = &out_value;
    }
    const LikelihoodParams theta = scale_outputs(*head_out, window.scale, kind);
    result.theta.push_back(theta);

    const double z = window.target[t];
    if (window.mask[t] == StepMask::Missing) {
      previous = sample(theta, rng);
      continue;
    }
    const NllResult term = nll(z, theta);
    if (!std::isfinite(term.nll)) {
      throw_non_finite(t, theta, z);
    }
    result.loss += term.nll;
    ++result.terms;
    if (compute_gradient) {
      terms[t] = term;
    }
    previous = z;
  }

  if (!compute_gradient) {
    return result;
  }

  ModelParams grad = params.zeros_like();
  std::vector<std::vector<double>> dh_next(num_layers, std::vector<double>(hidden, 0.0));
  std::vector<std::vector<double>> dc_next(num_layers, std::vector<double>(hidden, 0.0));
  std::vector<double> dh(hidden);
  const std::size_t emb_offset = 1 + params.arch.covariate_dim;

  for (std::size_t t = steps; t-- > 0;) {
    std::fill(dh.begin(), dh.end(), 0.0);
    if (window.mask[t] != StepMask::Missing) {
      const HeadOutput d_out = scale_outputs_grad(outputs[t], window.scale, kind, terms[t].d_mu,
                                                  terms[t].d_spread);
      head_backward(caches[t].back().h, params.head, d_out, grad.head, dh);
    }
    for (std::size_t l = num_layers; l-- > 0;) {
      for (std::size_t k = 0; k < hidden; ++k) {
        dh[k] += dh_next[l][k];
      }
      LstmInputGrads g = lstm_backward(caches[t][l], dh, dc_next[l], params.layers[l],
                                       grad.layers[l]);
      dh_next[l] = std::move(g.dh_prev);
      dc_next[l] = std::move(g.dc_prev);
      if (l > 0) {
        dh = std::move(g.dx);
      } else if (params.arch.embedding_dim > 0) {
        auto row = grad.embedding.row(window.category);
        for (std::size_t k = 0; k < params.arch.embedding_dim; ++k) {
          row[k] += g.dx[emb_offset + k];
        }
      }
    }
  }
  result.gradient = std::move(grad);
  return result;
}

EncodeResult encode(const TrainingWindow& window, const ModelParams& params, Rng& rng) {
  EncodeResult result;
  result.state = LstmState(params.layers.size(), params.arch.hidden_units);
  std::vector<double> scratch;
  double previous = 0.0;
  for (std::size_t t = 0; t < window.conditioning_length; ++t) {
    const auto input = step_input(window, t, previous, params);
    const LikelihoodParams theta = forward_step(params, result.state, input, window.scale, scratch);
    previous = window.mask[t] == StepMask::Missing ? sample(theta, rng) : window.target[t];
  }
  result.last_value = previous;
  return result;
}

}  // namespace deepar
