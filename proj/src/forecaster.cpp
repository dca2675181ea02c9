#include "deepar/forecaster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "deepar/error.hpp"
#include "deepar/parallel.hpp"
#include "deepar/random.hpp"
#include "json.hpp"

namespace deepar {

TrainingWindow forecast_window(const TimeSeries& series, long forecast_start, std::size_t horizon,
                               const ModelParams& params) {
  const std::size_t cond = params.arch.window.conditioning_length;
  const long first = forecast_start - static_cast<long>(cond);
  TrainingWindow w;
  w.start = first;
  w.conditioning_length = cond;
  w.category = series.category;
  w.target.assign(cond + horizon, 0.0);
  w.mask.assign(cond + horizon, StepMask::Missing);
  for (std::size_t k = 0; k < cond; ++k) {
    const long index = first + static_cast<long>(k);
    if (index < 0) {
      w.mask[k] = StepMask::Padded;
    } else if (const auto& v = series.target[static_cast<std::size_t>(index)]; v) {
      w.target[k] = *v;
      w.mask[k] = StepMask::Observed;
    }
  }
  w.scale = params.arch.use_scaling
                ? compute_scale(std::span<const double>(w.target).first(cond))
                : 1.0;
  w.covariates = build_covariates(series, first, cond + horizon, params.standardizer);
  return w;
}

ForecastSamples forecast(const TimeSeries& series, const ModelParams& params,
                         const ForecastOptions& options, std::optional<long> forecast_start) {
  if (series.freq != params.arch.granularity) {
    throw DataError("series '" + series.id + "' has freq " +
                    std::string(granularity_code(series.freq)) + " but the model was trained on " +
                    std::string(granularity_code(params.arch.granularity)));
  }
  if (options.num_samples < 1) {
    throw ConfigError("at least one sample path is required");
  }
  const long start = forecast_start.value_or(static_cast<long>(series.length()));
  if (start < 0 || start > static_cast<long>(series.length())) {
    throw DataError("forecast start is outside series '" + series.id + "'");
  }
  const bool any_observed =
      std::any_of(series.target.begin(), series.target.begin() + start,
                  [](const auto& v) { return v.has_value(); });
  if (!any_observed) {
    throw DataError("series '" + series.id + "' has no observed value before the forecast start");
  }
  const std::size_t horizon =
      options.horizon == 0 ? params.arch.window.prediction_length : options.horizon;
  const TrainingWindow window = forecast_window(series, start, horizon, params);
  const std::size_t cond = window.conditioning_length;
  const bool needs_imputation =
      std::any_of(window.mask.begin(), window.mask.begin() + static_cast<long>(cond),
                  [](StepMask m) { return m == StepMask::Missing; });

  ForecastSamples out;
  out.id = series.id;
  out.start = advance(series.start, series.freq, start);
  out.freq = series.freq;
  out.seed = options.seed;
  out.paths = Matrix(options.num_samples, horizon);

  const std::string stream = "path:" + series.id + "@" + std::to_string(start);
  std::optional<EncodeResult> shared;
  if (!needs_imputation) {
    Rng unused(0);
    shared = encode(window, params, unused);
  }

  parallel_for(options.num_samples, options.workers, [&](std::size_t i) {
    Rng rng = Rng::substream(options.seed, stream, i);
    EncodeResult enc = shared ? *shared : encode(window, params, rng);
    std::vector<double> scratch;
    double previous = enc.last_value;
    auto row = out.paths.row(i);
    for (std::size_t h = 0; h < horizon; ++h) {
      const auto input = step_input(window, cond + h, previous, params);
      const LikelihoodParams theta = forward_step(params, enc.state, input, window.scale, scratch);
      previous = sample(theta, rng);
      row[h] = previous;
    }
  });
  return out;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) {
    throw DomainError("quantile of an empty sample");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("quantile level must lie in (0, 1)");
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  // The 1e-9 guard keeps exact products such as 0.1 * 200 from rounding up.
  const double rank = std::ceil(level * n - 1e-9);
  const auto index = static_cast<std::size_t>(std::clamp(rank - 1.0, 0.0, n - 1.0));
  return values[index];
}

QuantileForecast quantiles(const ForecastSamples& samples, std::span<const double> levels) {
  if (samples.num_samples() == 0) {
    throw DomainError("no sample paths to take quantiles from");
  }
  QuantileForecast q;
  q.levels.assign(levels.begin(), levels.end());
  q.values = Matrix(levels.size(), samples.horizon());
  std::vector<double> column(samples.num_samples());
  for (std::size_t h = 0; h < samples.horizon(); ++h) {
    for (std::size_t i = 0; i < samples.num_samples(); ++i) {
      column[i] = samples.paths(i, h);
    }
    std::sort(column.begin(), column.end());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      q.values(l, h) = empirical_quantile(column, levels[l]);
    }
  }
  return q;
}

std::vector<double> span_sums(const Matrix& paths, std::size_t lead, std::size_t length) {
  if (length < 1 || lead + length > paths.cols()) {
    throw DomainError("span [" + std::to_string(lead) + ", " + std::to_string(lead + length) +
                      ") is outside the forecast horizon of " + std::to_string(paths.cols()));
  }
  std::vector<double> sums(paths.rows(), 0.0);
  for (std::size_t i = 0; i < paths.rows(); ++i) {
    for (std::size_t h = lead; h < lead + length; ++h) {
      sums[i] += paths(i, h);
    }
  }
  return sums;
}

double span_aggregate(const ForecastSamples& samples, std::size_t lead, std::size_t length,
                      double level) {
  return empirical_quantile(span_sums(samples.paths, lead, length), level);
}

ForecastSamples shuffle_paths(const ForecastSamples& samples, std::uint64_t seed) {
  ForecastSamples out = samples;
  const std::size_t n = samples.num_samples();
  for (std::size_t h = 0; h < samples.horizon(); ++h) {
    Rng rng = Rng::substream(seed, "shuffle", h);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(out.paths(i - 1, h), out.paths(j, h));
    }
  }
  return out;
}

std::string format_level(double level) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), level);
  return std::string(buf, ptr);
}

ForecastRecord make_record(const ForecastSamples& samples, std::span<const double> levels,
                           bool include_samples, std::size_t window) {
  ForecastRecord r;
  r.id = samples.id;
  r.start = samples.start;
  r.freq = samples.freq;
  r.window = window;
  r.horizon = samples.horizon();
  r.num_samples = samples.num_samples();
  r.seed = samples.seed;
  const QuantileForecast q = quantiles(samples, levels);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto row = q.values.row(l);
    r.quantiles[levels[l]] = std::vector<double>(row.begin(), row.end());
  }
  if (include_samples) {
    r.samples = samples.paths;
  }
  return r;
}

void write_forecast_jsonl(std::ostream& out, std::span<const ForecastRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["start"] = format_timestamp(r.start);
    obj["freq"] = std::string(granularity_code(r.freq));
    obj["window"] = r.window;
    obj["horizon"] = r.horizon;
    obj["num_samples"] = r.num_samples;
    obj["seed"] = r.seed;
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& [level, values] : r.quantiles) {
      q[format_level(level)] = values;
    }
    obj["quantiles"] = std::move(q);
    if (r.samples) {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < r.samples->rows(); ++i) {
        const auto row = r.samples->row(i);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
      }
      obj["samples"] = std::move(rows);
    }
    out << obj.dump() << '\n';
  }
}

std::vector<ForecastRecord> read_forecast_jsonl(std::istream& in, const std::string& source) {
  std::vector<ForecastRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto where = source + ": line " + std::to_string(line_no) + ": ";
    try {
      const auto obj = nlohmann::json::parse(line);
      ForecastRecord r;
      r.id = obj.at("id").get<std::string>();
      r.start = parse_timestamp(obj.at("start").get<std::string>());
      r.freq = parse_granularity(obj.at("freq").get<std::string>());
      r.window = obj.value("window", std::size_t{0});
      r.horizon = obj.at("horizon").get<std::size_t>();
      r.num_samples = obj.value("num_samples", std::size_t{0});
      r.seed = obj.value("seed", std::uint64_t{0});
      for (const auto& [key, values] : obj.at("quantiles").items()) {
        double level = 0.0;
        const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), level);
        if (ec != std::errc{} || ptr != key.data() + key.size()) {
          throw DataError("bad quantile level '" + key + "'");
        }
        r.quantiles[level] = values.get<std::vector<double>>();
        if (r.quantiles[level].size() != r.horizon) {
          throw DataError("quantile array length differs from horizon");
        }
      }
      if (obj.contains("samples")) {
        const auto& rows = obj.at("samples");
        Matrix m(rows.size(), r.horizon);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto row = rows[i].get<std::vector<double>>();
          if (row.size() != r.horizon) {
            throw DataError("sample path length differs from horizon");
          }
          std::copy(row.begin(), row.end(), m.row(i).begin());
        }
        r.samples = std::move(m);
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return out;
}

}  // namespace deepar
