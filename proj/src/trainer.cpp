#include "deepar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "deepar/adam.hpp"
#include "deepar/error.hpp"
#include "deepar/parallel.hpp"
#include "deepar/random.hpp"

namespace deepar {

void TrainLog::write_tsv(std::ostream& out) const {
  out << "evaluation\tbatches\ttrain_nll\tvalidation_nll\telapsed_seconds\n";
  for (const auto& e : entries) {
    out << e.evaluation << '\t' << e.batches << '\t';
    if (e.batches == 0) {
      out << "NA";
    } else {
      out << e.train_nll;
    }
    out << '\t' << e.validation_nll << '\t' << e.elapsed_seconds << '\n';
  }
  out << "# stop_reason=" << stop_reason << " best_evaluation=" << best_evaluation
      << " best_validation_nll=" << best_validation_nll << '\n';
}

ModelArchitecture architecture_for(const Panel& panel, const TrainConfig& config) {
  if (panel.empty()) {
    throw DataError("cannot train on an empty panel");
  }
  ModelArchitecture a;
  a.likelihood = config.likelihood;
  a.window = config.window;
  a.granularity = panel.front().freq;
  a.covariate_dim = covariate_dim(a.granularity);
  a.num_categories = category_count(panel);
  a.embedding_dim = config.embedding_dim;
  a.hidden_units = config.hidden_units;
  a.num_layers = config.num_layers;
  a.use_scaling = !config.no_scaling;
  return a;
}

std::vector<TrainingWindow> validation_windows(const Panel& panel, const DatasetPlan& plan,
                                               const TrainConfig& config) {
  std::vector<std::pair<std::size_t, long>> placements;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!plan.validation[i]) {
      continue;
    }
    for (long s = plan.validation[i]->first; s <= plan.validation[i]->last; ++s) {
      placements.emplace_back(i, s);
    }
  }
  std::vector<TrainingWindow> out;
  const std::size_t n = placements.size();
  const std::size_t keep = std::min(n, config.max_validation_windows);
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& [series, start] = placements[k * n / keep];
    out.push_back(make_window(panel[series], series, start, plan.spec, plan.standardizer,
                              !config.no_scaling));
  }
  return out;
}

double mean_nll(const ModelParams& params, std::span<const TrainingWindow> windows,
                std::uint64_t seed, std::size_t workers) {
  std::vector<double> losses(windows.size(), 0.0);
  std::vector<std::size_t> terms(windows.size(), 0);
  parallel_for(windows.size(), workers, [&](std::size_t k) {
    Rng rng = Rng::substream(seed, "validation", k);
    try {
      const auto r = unroll_training(windows[k], params, rng, false);
      losses[k] = r.loss;
      terms[k] = r.terms;
    } catch (const NumericError&) {
      losses[k] = std::numeric_limits<double>::infinity();
      terms[k] = 1;
    } catch (const DomainError&) {
      losses[k] = std::numeric_limits<double>::infinity();
      terms[k] = 1;
    }
  });
  double loss = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    loss += losses[k];
    count += terms[k];
  }
  return count == 0 ? 0.0 : loss / static_cast<double>(count);
}

TrainResult train(const Panel& panel, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  validate_for_likelihood(panel, config.likelihood);
  const auto clock_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  };

  const DatasetPlan plan = plan_dataset(panel, config.window, config.validation_fraction);
  TrainLog log;
  for (std::size_t i : plan.skipped) {
    log.warnings.push_back("series '" + panel[i].id + "' is shorter than the prediction length; "
                           "skipped");
  }

  Rng init_rng = Rng::substream(config.seed, "init");
  ModelParams model =
      ModelParams::initialized(architecture_for(panel, config), plan.standardizer, init_rng);
  const WindowSampler sampler(panel, plan, {config.uniform_sampling, config.no_scaling});

  std::vector<TrainingWindow> validation = validation_windows(panel, plan, config);
  if (validation.empty()) {
    log.warnings.push_back(
        "no series has room for a validation window; validating on sampled training windows");
    Rng fallback = Rng::substream(config.seed, "validation-fallback");
    for (std::size_t k = 0; k < config.max_validation_windows; ++k) {
      validation.push_back(sampler.draw(fallback));
    }
  }

  auto params = model.block_pointers();
  AdamState adam({config.learning_rate}, std::span<const Matrix* const>(
                                              const_cast<const ModelParams&>(model).block_pointers()));

  double best = mean_nll(model, validation, config.seed, options.workers);
  log.entries.push_back({0, 0, std::numeric_limits<double>::quiet_NaN(), best, elapsed()});
  log.best_validation_nll = best;
  ModelParams best_model = model;

  Rng sampling = Rng::substream(config.seed, "sampling");
  const std::size_t batches_per_epoch =
      std::max<std::size_t>(1, config.windows_per_epoch / config.batch_size);
  std::size_t window_counter = 0;
  std::size_t bad_batches = 0;
  std::size_t since_improvement = 0;
  double epoch_loss = 0.0;
  std::size_t epoch_terms = 0;

  std::vector<TrainingWindow> batch(config.batch_size);
  std::vector<UnrollResult> results(config.batch_size);
  std::vector<char> failed(config.batch_size);

  const auto evaluate = [&](std::size_t batches_done) {
    const double val = mean_nll(model, validation, config.seed, options.workers);
    const double train_nll =
        epoch_terms == 0 ? std::numeric_limits<double>::quiet_NaN()
                         : epoch_loss / static_cast<double>(epoch_terms);
    log.entries.push_back({log.entries.size(), batches_done, train_nll, val, elapsed()});
    epoch_loss = 0.0;
    epoch_terms = 0;
    if (val < best) {
      best = val;
      best_model = model;
      log.best_evaluation = log.entries.back().evaluation;
      log.best_validation_nll = val;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  };

  log.stop_reason = "max_batches";
  std::size_t b = 0;
  while (b < config.max_batches) {
    ++b;
    const std::size_t first_window = window_counter;
    for (auto& w : batch) {
      w = sampler.draw(sampling);
    }
    window_counter += batch.size();
    parallel_for(batch.size(), options.workers, [&](std::size_t k) {
      Rng impute = Rng::substream(config.seed, "impute", first_window + k);
      failed[k] = 0;
      try {
        results[k] = unroll_training(batch[k], model, impute, true);
        if (!std::isfinite(results[k].loss)) {
          failed[k] = 1;
        }
      } catch (const NumericError&) {
        failed[k] = 1;
      } catch (const DomainError&) {
        failed[k] = 1;
      }
    });

    const bool batch_bad = std::any_of(failed.begin(), failed.end(), [](char f) { return f; });
    if (!batch_bad) {
      ModelParams grad = model.zeros_like();
      double loss = 0.0;
      std::size_t terms = 0;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        grad.add(results[k].gradient);
        loss += results[k].loss;
        terms += results[k].terms;
      }
      if (terms > 0) {
        grad.scale_by(1.0 / static_cast<double>(terms));
        auto grad_blocks = grad.block_pointers();
        clip_global_norm(grad_blocks, config.grad_clip);
        try {
          adam_step(params, std::span<const Matrix* const>(
                                const_cast<const ModelParams&>(grad).block_pointers()),
                    adam);
          epoch_loss += loss;
          epoch_terms += terms;
          bad_batches = 0;
        } catch (const NumericError&) {
          ++bad_batches;
        }
      }
    } else {
      ++bad_batches;
    }
    if (bad_batches >= 3) {
      log.diverged = true;
      log.stop_reason = "diverged";
      break;
    }

    if (b % batches_per_epoch == 0 || b == config.max_batches) {
      evaluate(b);
      if (since_improvement >= config.patience) {
        log.stop_reason = "early_stopping";
        break;
      }
    }
  }
  log.batches = b;
  return {std::move(best_model), std::move(log)};
}

std::vector<TrainConfig> grid_candidates(const TrainConfig& base,
                                         std::span<const std::size_t> hidden_units,
                                         std::span<const std::size_t> embedding_dims) {
  if (hidden_units.empty() || embedding_dims.empty()) {
    throw ConfigError("grid search needs at least one candidate per axis");
  }
  std::vector<TrainConfig> out;
  for (std::size_t h : hidden_units) {
    for (std::size_t e : embedding_dims) {
      TrainConfig c = base;
      c.hidden_units = h;
      c.embedding_dim = e;
      out.push_back(c);
    }
  }
  return out;
}

GridResult grid_search(const Panel& panel, std::span<const TrainConfig> candidates,
                       const TrainOptions& options) {
  if (candidates.empty()) {
    throw ConfigError("grid search needs at least one candidate");
  }
  GridResult result;
  std::vector<TrainResult> runs;
  for (const auto& config : candidates) {
    TrainResult run = train(panel, config, options);
    GridCandidate c;
    c.config = config;
    c.diverged = run.log.diverged || !std::isfinite(run.log.best_validation_nll);
    c.validation_nll = run.log.best_validation_nll;
    c.parameter_count = run.model.parameter_count();
    result.candidates.push_back(c);
    runs.push_back(std::move(run));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = result.candidates[a];
    const auto& cb = result.candidates[b];
    if (ca.diverged != cb.diverged) return !ca.diverged;
    if (ca.validation_nll != cb.validation_nll) return ca.validation_nll < cb.validation_nll;
    return ca.parameter_count < cb.parameter_count;
  });
  result.best_index = order.front();
  if (result.candidates[result.best_index].diverged) {
    throw NumericError("grid search: every candidate diverged");
  }
  result.best = std::move(runs[result.best_index]);
  return result;
}

}  // namespace deepar
