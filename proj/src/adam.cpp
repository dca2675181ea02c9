#include "deepar/adam.hpp"

#include <cmath>
#include <sstream>

#include "deepar/error.hpp"

namespace deepar {

AdamState::AdamState(AdamOptions opts, std::span<const Matrix* const> params) : options(opts) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Matrix* p : params) {
    first_moment.emplace_back(p->rows(), p->cols());
    second_moment.emplace_back(p->rows(), p->cols());
  }
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ConfigError("adam_step: parameter, gradient and moment block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (!params[b]->same_shape(*grads[b]) || !params[b]->same_shape(state.first_moment[b])) {
      throw ConfigError("adam_step: shape mismatch in block " + std::to_string(b));
    }
    const auto g = grads[b]->values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "adam_step: non-finite gradient " << g[i] << " in block " << b << " entry " << i
            << " at step " << state.step + 1 << "; step skipped";
        throw NumericError(msg.str());
      }
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b]->values();
    const auto g = grads[b]->values();
    auto m = state.first_moment[b].values();
    auto v = state.second_moment[b].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double clip_global_norm(std::span<Matrix* const> grads, double max_norm) {
  double total = 0.0;
  for (const Matrix* g : grads) {
    total += squared_norm(g->values());
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (Matrix* g : grads) {
      for (double& v : g->values()) {
        v *= factor;
      }
    }
  }
  return norm;
}

}  // namespace deepar
