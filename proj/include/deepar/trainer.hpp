#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "deepar/config.hpp"
#include "deepar/dataset.hpp"
#include "deepar/network.hpp"

namespace deepar {

struct TrainLogEntry {
  std::size_t evaluation = 0;
  std::size_t batches = 0;
  double train_nll = 0.0;       // mean per-step NLL over batches since the last evaluation
  double validation_nll = 0.0;  // mean per-step NLL on the validation windows
  double elapsed_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::vector<std::string> warnings;
  std::string stop_reason;
  std::size_t best_evaluation = 0;
  double best_validation_nll = 0.0;
  std::size_t batches = 0;
  bool diverged = false;

  double initial_validation_nll() const { return entries.front().validation_nll; }
  // Header plus one tab-separated row per evaluation.
  void write_tsv(std::ostream& out) const;
};

struct TrainResult {
  ModelParams model;  // best-validation snapshot
  TrainLog log;
};

struct TrainOptions {
  std::size_t workers = 1;
};

ModelArchitecture architecture_for(const Panel& panel, const TrainConfig& config);

// Validation windows used for early stopping: every validation placement,
// thinned to config.max_validation_windows by even spacing.
std::vector<TrainingWindow> validation_windows(const Panel& panel, const DatasetPlan& plan,
                                               const TrainConfig& config);

// Mean per-step NLL of `params` over `windows`; missing inputs are imputed
// with per-window substreams of `seed`, so the value is deterministic.
double mean_nll(const ModelParams& params, std::span<const TrainingWindow> windows,
                std::uint64_t seed, std::size_t workers = 1);

// Adam on batches of weighted windows with early stopping on the chronological
// validation split. A run whose loss is non-finite for three consecutive
// batches stops with log.diverged set.
TrainResult train(const Panel& panel, const TrainConfig& config, const TrainOptions& options = {});

struct GridCandidate {
  TrainConfig config;
  double validation_nll = 0.0;
  std::size_t parameter_count = 0;
  bool diverged = false;
};

struct GridResult {
  std::size_t best_index = 0;
  std::vector<GridCandidate> candidates;  // in input order
  TrainResult best;
};

// Cartesian product of hidden-unit and embedding-dimension candidates.
std::vector<TrainConfig> grid_candidates(const TrainConfig& base,
                                         std::span<const std::size_t> hidden_units,
                                         std::span<const std::size_t> embedding_dims);

// Trains each candidate and keeps the lowest validation NLL, preferring fewer
// parameters on ties. Diverged candidates rank last; throws NumericError when
// every candidate diverges.
GridResult grid_search(const Panel& panel, std::span<const TrainConfig> candidates,
                       const TrainOptions& options = {});

}  // namespace deepar
