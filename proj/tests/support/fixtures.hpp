#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deepar/calendar.hpp"
#include "deepar/dataset.hpp"
#include "deepar/network.hpp"
#include "deepar/random.hpp"

namespace deepar::testing {

inline TimeSeries make_series(std::vector<std::optional<double>> values, std::string id = "s",
                              Granularity freq = Granularity::Daily,
                              std::string_view start = "2014-01-01", std::size_t category = 0) {
  TimeSeries s;
  s.id = std::move(id);
  s.start = parse_timestamp(start);
  s.freq = freq;
  s.target = std::move(values);
  s.category = category;
  return s;
}

struct TinyModel {
  ModelParams params;
  Panel panel;
  DatasetPlan plan;
};

// Randomly initialized model over a two-series daily panel. Weights get an
// extra perturbation so gradient checks do not sit on the init symmetry.
inline TinyModel tiny_model(LikelihoodKind kind, std::size_t layers, std::size_t hidden,
                            std::size_t embedding, WindowSpec spec, std::uint64_t seed) {
  TinyModel m;
  Rng data(seed + 1000);
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<std::optional<double>> v;
    for (std::size_t t = 0; t < 30; ++t) {
      const double mean = 3.0 + 4.0 * static_cast<double>(i);
      v.emplace_back(kind == LikelihoodKind::NegativeBinomial
                         ? static_cast<double>(data.poisson(mean))
                         : mean + data.normal());
    }
    m.panel.push_back(make_series(std::move(v), "s" + std::to_string(i), Granularity::Daily,
                                  "2014-01-01", i));
  }
  m.plan = plan_dataset(m.panel, spec);
  ModelArchitecture arch;
  arch.likelihood = kind;
  arch.window = spec;
  arch.granularity = Granularity::Daily;
  arch.covariate_dim = covariate_dim(Granularity::Daily);
  arch.num_categories = 2;
  arch.embedding_dim = embedding;
  arch.hidden_units = hidden;
  arch.num_layers = layers;
  Rng init(seed);
  m.params = ModelParams::initialized(arch, m.plan.standardizer, init);
  for (Matrix* block : m.params.block_pointers()) {
    for (double& v : block->values()) {
      v += 0.1 * init.normal();
    }
  }
  return m;
}

// Gaussian model whose every output is mu = level and sigma at its floor for a
// series that is constant at `level`: all weights zero, b_mu = level / nu.
inline ModelParams constant_model(const Panel& panel, double level, WindowSpec spec) {
  const DatasetPlan plan = plan_dataset(panel, spec);
  ModelArchitecture arch;
  arch.likelihood = LikelihoodKind::Gaussian;
  arch.window = spec;
  arch.granularity = panel.front().freq;
  arch.covariate_dim = covariate_dim(arch.granularity);
  arch.num_categories = category_count(panel);
  arch.embedding_dim = 1;
  arch.hidden_units = 4;
  arch.num_layers = 1;
  Rng init(0);
  ModelParams p = ModelParams::initialized(arch, plan.standardizer, init);
  for (Matrix* block : p.block_pointers()) {
    block->fill(0.0);
  }
  p.head.b_mu[0] = level / (1.0 + level);
  p.head.b_spread[0] = -50.0;
  return p;
}

}  // namespace deepar::testing
