#include "deepar/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "deepar/config.hpp"
#include "deepar/dataset.hpp"
#include "deepar/error.hpp"
#include "deepar/evaluator.hpp"
#include "deepar/forecaster.hpp"
#include "deepar/manifest.hpp"
#include "deepar/model_io.hpp"
#include "deepar/trainer.hpp"

namespace deepar {
namespace {

namespace fs = std::filesystem;

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size() || !(v > 0.0 && v < 1.0)) {
      throw ConfigError("quantile level '" + item + "' must be a number in (0, 1)");
    }
    levels.push_back(v);
  }
  if (levels.empty()) {
    throw ConfigError("no quantile levels given");
  }
  return levels;
}

std::vector<std::size_t> parse_counts(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size() || v == 0) {
      throw ConfigError(std::string(what) + " entry '" + item + "' must be a positive integer");
    }
    out.push_back(v);
  }
  return out;
}

nlohmann::ordered_json config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  std::istringstream in(to_text(c));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    const std::string value = line.substr(eq + 3);
    // Numbers and booleans keep their JSON type; names stay strings.
    j[line.substr(0, eq)] = nlohmann::ordered_json::accept(value)
                                ? nlohmann::ordered_json::parse(value)
                                : nlohmann::ordered_json(value);
  }
  return j;
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool grid = false;
  std::string grid_hidden;
  std::string grid_embedding;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.arguments = argv;
  manifest.started_at = utc_now();

  TrainConfig config = a.config.empty() ? TrainConfig{} : load_config(a.config);
  if (a.seed) {
    config.seed = *a.seed;
  }
  config.validate();
  const Panel panel = load_jsonl(a.data);
  validate_for_likelihood(panel, config.likelihood);

  TrainResult result;
  if (a.grid) {
    const auto hidden = a.grid_hidden.empty() ? std::vector<std::size_t>{config.hidden_units}
                                              : parse_counts(a.grid_hidden, "--grid-hidden");
    const auto embedding = a.grid_embedding.empty()
                               ? std::vector<std::size_t>{config.embedding_dim}
                               : parse_counts(a.grid_embedding, "--grid-embedding");
    const auto candidates = grid_candidates(config, hidden, embedding);
    GridResult grid = grid_search(panel, candidates, {a.workers});
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : grid.candidates) {
      cands.push_back({{"hidden_units", c.config.hidden_units},
                       {"embedding_dim", c.config.embedding_dim},
                       {"validation_nll", c.validation_nll},
                       {"parameter_count", c.parameter_count},
                       {"diverged", c.diverged}});
    }
    manifest.details["grid"] = std::move(cands);
    manifest.details["best_candidate"] = grid.best_index;
    config = grid.candidates[grid.best_index].config;
    result = std::move(grid.best);
  } else {
    result = train(panel, config, {a.workers});
  }
  for (const auto& w : result.log.warnings) {
    err << "warning: " << w << '\n';
  }

  const fs::path model_path = a.output;
  fs::path log_path = model_path;
  log_path += ".log.tsv";
  fs::path manifest_path = model_path;
  manifest_path += ".manifest.json";

  std::ostringstream log_text;
  result.log.write_tsv(log_text);
  write_file_atomic(log_path, log_text.str());
  if (result.log.diverged) {
    err << "error: training diverged after " << result.log.batches
        << " batches (non-finite loss); see " << log_path.string() << '\n';
    return kExitFailure;
  }
  save_model(model_path, result.model);

  manifest.config = config_json(config);
  manifest.seeds = {{"seed", config.seed},
                    {"substreams", {"init", "sampling", "impute", "validation"}}};
  manifest.inputs.push_back(a.data);
  if (!a.config.empty()) {
    manifest.inputs.push_back(a.config);
  }
  manifest.outputs = {model_path, log_path};
  manifest.details["stop_reason"] = result.log.stop_reason;
  manifest.details["batches"] = result.log.batches;
  manifest.details["best_validation_nll"] = result.log.best_validation_nll;
  manifest.details["workers"] = a.workers;
  manifest.finished_at = utc_now();
  manifest.write(manifest_path);
  out << "model written to " << model_path.string() << " (best validation NLL "
      << result.log.best_validation_nll << ", " << result.log.stop_reason << ")\n";
  return kExitSuccess;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string output;
  std::size_t horizon = 0;
  std::size_t samples = kDefaultSampleCount;
  std::string quantiles = "0.5,0.9";
  std::uint64_t seed = 0;
  bool emit_samples = false;
  std::size_t workers = 1;
  std::size_t rolling = 0;
  std::size_t stride = 0;
};

int cmd_predict(const PredictArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "predict";
  manifest.arguments = argv;
  manifest.started_at = utc_now();

  const auto levels = parse_levels(a.quantiles);
  if (a.samples < 1) {
    throw ConfigError("--samples must be at least 1");
  }
  const ModelParams model = load_model(a.model);
  const Panel panel = load_jsonl(a.data);
  if (panel.front().freq != model.arch.granularity) {
    throw DataError("data freq " + std::string(granularity_code(panel.front().freq)) +
                    " does not match the model's " +
                    std::string(granularity_code(model.arch.granularity)));
  }
  validate_for_likelihood(panel, model.arch.likelihood);
  const std::size_t horizon = a.horizon == 0 ? model.arch.window.prediction_length : a.horizon;

  std::vector<ForecastRecord> records;
  const ForecastOptions options{a.samples, horizon, a.seed, a.workers};
  if (a.rolling == 0) {
    for (const auto& s : panel) {
      records.push_back(make_record(forecast(s, model, options), levels, a.emit_samples));
    }
  } else {
    RollingSpec rs;
    rs.windows = a.rolling;
    rs.stride = a.stride == 0 ? horizon : a.stride;
    for (std::size_t k = 0; k < rs.windows; ++k) {
      for (const auto& s : panel) {
        const long start = rolling_start(s.length(), rs, horizon, k);
        if (start < 1) {
          throw DataError("series '" + s.id + "' is too short for " + std::to_string(rs.windows) +
                          " rolling windows of " + std::to_string(horizon) + " steps");
        }
        records.push_back(
            make_record(forecast(s, model, options, start), levels, a.emit_samples, k));
      }
    }
  }

  std::ostringstream text;
  write_forecast_jsonl(text, records);
  if (a.output.empty()) {
    out << text.str();
    return kExitSuccess;
  }
  write_file_atomic(a.output, text.str());
  manifest.config = {{"samples", a.samples},
                     {"horizon", horizon},
                     {"quantiles", levels},
                     {"emit_samples", a.emit_samples},
                     {"rolling", a.rolling},
                     {"stride", a.stride}};
  manifest.seeds = {{"seed", a.seed}, {"substreams", {"path:<id>@<start>"}}};
  manifest.inputs = {a.model, a.data};
  manifest.outputs = {a.output};
  manifest.details["series"] = panel.size();
  manifest.details["workers"] = a.workers;
  manifest.finished_at = utc_now();
  manifest.write(a.output + ".manifest.json");
  return kExitSuccess;
}

struct EvaluateArgs {
  std::string forecasts;
  std::string truth;
  std::string spans = "0:1";
  std::string quantiles;
  std::string output;
  bool coverage = false;
  bool rolling = false;
};

std::vector<EvalItem> align(const std::vector<ForecastRecord>& records, const Panel& truth,
                            const std::vector<std::size_t>& which) {
  std::map<std::string, const TimeSeries*> by_id;
  for (const auto& s : truth) {
    by_id[s.id] = &s;
  }
  std::vector<EvalItem> items;
  for (std::size_t r : which) {
    const auto& rec = records[r];
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) {
      throw DataError("forecast id '" + rec.id + "' has no truth series");
    }
    const TimeSeries& s = *it->second;
    if (s.freq != rec.freq) {
      throw DataError("forecast '" + rec.id + "' freq differs from its truth series");
    }
    const long start = steps_between(s.start, rec.start, s.freq);
    if (start < 0 || start + static_cast<long>(rec.horizon) > static_cast<long>(s.length())) {
      throw DataError("forecast '" + rec.id + "' starting " + format_timestamp(rec.start) +
                      " is not covered by the truth series");
    }
    EvalItem item;
    item.id = rec.id;
    for (std::size_t h = 0; h < rec.horizon; ++h) {
      const auto& v = s.target[static_cast<std::size_t>(start) + h];
      if (!v) {
        throw DataError("truth for '" + rec.id + "' is missing at " +
                        format_timestamp(advance(rec.start, s.freq, static_cast<long>(h))));
      }
      item.truth.push_back(*v);
    }
    if (rec.samples) {
      item.paths = *rec.samples;
    }
    item.quantiles = rec.quantiles;
    items.push_back(std::move(item));
  }
  return items;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  std::ifstream in(a.forecasts);
  if (!in) {
    throw DataError("cannot open " + a.forecasts);
  }
  const auto records = read_forecast_jsonl(in, a.forecasts);
  if (records.empty()) {
    throw DataError(a.forecasts + " holds no forecasts");
  }
  const Panel truth = load_jsonl(a.truth);

  EvalSpec spec;
  spec.spans = parse_spans(a.spans);
  spec.coverage = a.coverage;
  if (!a.quantiles.empty()) {
    spec.levels = parse_levels(a.quantiles);
  } else {
    spec.levels.clear();
    for (const auto& [level, values] : records.front().quantiles) {
      spec.levels.push_back(level);
    }
  }
  if (a.coverage) {
    for (const auto& r : records) {
      if (!r.samples) {
        throw DataError("coverage requested but '" + r.id +
                        "' has no sample matrix; re-run predict with --emit-samples");
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < records.size(); ++r) {
    groups[a.rolling ? records[r].window : 0].push_back(r);
  }
  std::vector<MetricReport> reports;
  std::vector<EvalItem> pooled;
  for (const auto& [window, which] : groups) {
    auto items = align(records, truth, which);
    reports.push_back(evaluate(items, spec));
    pooled.insert(pooled.end(), items.begin(), items.end());
  }

  nlohmann::ordered_json json;
  std::ostringstream table;
  std::ostringstream coverage;
  if (a.rolling) {
    const MetricReport pooled_report = evaluate(pooled, spec);
    auto windows = nlohmann::ordered_json::array();
    std::size_t k = 0;
    for (const auto& [window, which] : groups) {
      windows.push_back(nlohmann::ordered_json::parse(reports[k].to_json()));
      table << "== window " << window << " ==\n";
      reports[k].write_table(table);
      ++k;
    }
    json["windows"] = std::move(windows);
    json["pooled"] = nlohmann::ordered_json::parse(pooled_report.to_json());
    table << "== pooled ==\n";
    pooled_report.write_table(table);
    pooled_report.write_coverage_tsv(coverage);
  } else {
    json = nlohmann::ordered_json::parse(reports.front().to_json());
    reports.front().write_table(table);
    reports.front().write_coverage_tsv(coverage);
  }
  out << table.str();
  if (!a.output.empty()) {
    write_file_atomic(a.output + ".json", json.dump(2) + "\n");
    write_file_atomic(a.output + ".txt", table.str());
    if (a.coverage) {
      write_file_atomic(a.output + ".coverage.tsv", coverage.str());
    }
  }
  return kExitSuccess;
}

int cmd_stats(const std::string& data, double width, std::ostream& out) {
  const Panel panel = load_jsonl(data);
  for (const auto& b : velocity_histogram(panel, width)) {
    out << b.lower << '\t' << b.upper << '\t' << b.count << '\n';
  }
  return kExitSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic forecasting with an autoregressive recurrent network", "deepar"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a JSON-lines panel");
  train_cmd->add_option("--data", train_args.data, "Training panel (JSON lines)")->required();
  train_cmd->add_option("--config", train_args.config, "key = value config file");
  train_cmd->add_option("--output", train_args.output, "Model file to write")->required();
  train_cmd->add_option("--seed", train_args.seed, "Overrides the config seed");
  train_cmd->add_option("--workers", train_args.workers, "Parallel workers")->check(
      CLI::PositiveNumber);
  train_cmd->add_flag("--grid", train_args.grid, "Grid search over hidden units and embedding");
  train_cmd->add_option("--grid-hidden", train_args.grid_hidden, "Comma-separated hidden units");
  train_cmd->add_option("--grid-embedding", train_args.grid_embedding,
                        "Comma-separated embedding dimensions");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Sample forecasts from a trained model");
  predict_cmd->add_option("--model", predict_args.model, "Model file")->required();
  predict_cmd->add_option("--data", predict_args.data, "Conditioning data (JSON lines)")
      ->required();
  predict_cmd->add_option("--output", predict_args.output, "Forecast JSON lines (default stdout)");
  predict_cmd->add_option("--horizon", predict_args.horizon, "Steps to forecast");
  predict_cmd->add_option("--samples", predict_args.samples, "Sample paths per series")
      ->capture_default_str();
  predict_cmd->add_option("--quantiles", predict_args.quantiles, "Comma-separated levels")
      ->capture_default_str();
  predict_cmd->add_option("--seed", predict_args.seed, "Sampling seed");
  predict_cmd->add_flag("--emit-samples", predict_args.emit_samples, "Include sample matrices");
  predict_cmd->add_option("--workers", predict_args.workers, "Parallel workers")->check(
      CLI::PositiveNumber);
  predict_cmd->add_option("--rolling", predict_args.rolling,
                          "Backtest windows ending at the last observation");
  predict_cmd->add_option("--stride", predict_args.stride, "Steps between backtest windows");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score forecasts against realized values");
  eval_cmd->add_option("--forecasts", eval_args.forecasts, "Forecast JSON lines")->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Realized panel (JSON lines)")->required();
  eval_cmd->add_option("--spans", eval_args.spans, "LEAD:LENGTH list")->capture_default_str();
  eval_cmd->add_option("--quantiles", eval_args.quantiles, "Levels to score");
  eval_cmd->add_option("--output", eval_args.output, "Report path prefix");
  eval_cmd->add_flag("--coverage", eval_args.coverage, "Compute Coverage(p) curves");
  eval_cmd->add_flag("--rolling", eval_args.rolling, "Report per backtest window and pooled");

  std::string stats_data;
  double bucket_width = 0.25;
  auto* stats_cmd = app.add_subcommand("stats", "Velocity histogram of a panel");
  stats_cmd->add_option("--data", stats_data, "Panel (JSON lines)")->required();
  stats_cmd->add_option("--bucket-width", bucket_width, "Width in log10 units")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, args, out, err);
    if (*predict_cmd) return cmd_predict(predict_args, args, out);
    if (*eval_cmd) return cmd_evaluate(eval_args, out);
    if (*stats_cmd) return cmd_stats(stats_data, bucket_width, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace deepar
