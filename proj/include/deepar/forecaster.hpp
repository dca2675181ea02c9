#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepar/calendar.hpp"
#include "deepar/dataset.hpp"
#include "deepar/matrix.hpp"
#include "deepar/network.hpp"

namespace deepar {

inline constexpr std::size_t kDefaultSampleCount = 200;

// Sample paths for one series: paths(i, h) is step h of path i.
struct ForecastSamples {
  std::string id;
  TimePoint start{};  // time of the first forecast step
  Granularity freq = Granularity::Daily;
  Matrix paths;       // num_samples x horizon
  std::uint64_t seed = 0;

  std::size_t num_samples() const { return paths.rows(); }
  std::size_t horizon() const { return paths.cols(); }
};

struct ForecastOptions {
  std::size_t num_samples = kDefaultSampleCount;
  std::size_t horizon = 0;  // 0 = the model's prediction length
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Conditioning range [forecast_start - C, forecast_start) followed by
// `horizon` steps with unknown targets (marked missing).
TrainingWindow forecast_window(const TimeSeries& series, long forecast_start, std::size_t horizon,
                               const ModelParams& params);

// Ancestral sampling from `forecast_start` (default: right after the last
// observation). Path i draws from its own substream of (seed, series id,
// forecast start, i); missing conditioning values are imputed per path.
ForecastSamples forecast(const TimeSeries& series, const ModelParams& params,
                         const ForecastOptions& options, std::optional<long> forecast_start = {});

// Nearest-rank empirical quantile: sorted[ceil(level * n) - 1].
double empirical_quantile(std::vector<double> values, double level);

struct QuantileForecast {
  std::vector<double> levels;
  Matrix values;  // levels x horizon
};

QuantileForecast quantiles(const ForecastSamples& samples, std::span<const double> levels);

// Sum of each path over [lead, lead + length).
std::vector<double> span_sums(const Matrix& paths, std::size_t lead, std::size_t length);
double span_aggregate(const ForecastSamples& samples, std::size_t lead, std::size_t length,
                      double level);

// Independently permutes the samples at each step; per-step marginals are kept.
ForecastSamples shuffle_paths(const ForecastSamples& samples, std::uint64_t seed);

// One line of the forecast JSONL output.
struct ForecastRecord {
  std::string id;
  TimePoint start{};
  Granularity freq = Granularity::Daily;
  std::size_t window = 0;
  std::size_t horizon = 0;
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;
  std::map<double, std::vector<double>> quantiles;
  std::optional<Matrix> samples;
};

ForecastRecord make_record(const ForecastSamples& samples, std::span<const double> levels,
                           bool include_samples, std::size_t window = 0);
void write_forecast_jsonl(std::ostream& out, std::span<const ForecastRecord> records);
std::vector<ForecastRecord> read_forecast_jsonl(std::istream& in,
                                                const std::string& source = "<forecasts>");
std::string format_level(double level);

}  // namespace deepar
