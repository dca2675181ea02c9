#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepar/calendar.hpp"
#include "deepar/likelihood.hpp"
#include "deepar/matrix.hpp"

namespace deepar {

class Rng;

struct TimeSeries {
  std::string id;
  TimePoint start{};
  Granularity freq = Granularity::Daily;
  std::vector<std::optional<double>> target;  // nullopt = missing observation
  std::size_t category = 0;

  std::size_t length() const { return target.size(); }
  std::size_t observed_count() const;
};

using Panel = std::vector<TimeSeries>;

// One JSON object per line: {"id", "start", "freq", "target", "cat"}.
Panel load_jsonl(const std::filesystem::path& path);
Panel parse_jsonl(std::istream& in, const std::string& source = "<stream>");
void write_jsonl(std::ostream& out, const Panel& panel);

// Negative binomial panels must hold integer counts.
void validate_for_likelihood(const Panel& panel, LikelihoodKind kind);
std::size_t category_count(const Panel& panel);

struct WindowSpec {
  std::size_t conditioning_length = 0;
  std::size_t prediction_length = 0;

  std::size_t total() const { return conditioning_length + prediction_length; }
  void validate() const;
  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

enum class StepMask : std::uint8_t { Observed = 0, Padded = 1, Missing = 2 };

// 1 + mean of the conditioning values; callers pass 0 for padded and
// missing steps, which still count in the divisor.
double compute_scale(std::span<const double> conditioning);
double compute_scale(std::span<const std::optional<double>> conditioning);
// Scale of a whole series, used as its sampling weight.
double series_scale(const TimeSeries& series);

// Age plus calendar features.
std::size_t covariate_dim(Granularity g);

// Unstandardized covariates for steps [first_index, first_index + length) of
// `series`; row k holds age = first_index + k followed by calendar features.
Matrix raw_covariates(const TimeSeries& series, long first_index, std::size_t length);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  void apply(Matrix& covariates) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Matrix build_covariates(const TimeSeries& series, long first_index, std::size_t length,
                        const Standardizer& standardizer);

// Inclusive range of window start indices (relative to the series start).
struct PlacementRange {
  long first = 0;
  long last = 0;

  std::size_t count() const { return static_cast<std::size_t>(last - first + 1); }
  friend bool operator==(const PlacementRange&, const PlacementRange&) = default;
};

// Starts from -conditioning_length (fully padded conditioning range) to
// length - total, so the prediction range always lies inside the series.
std::optional<PlacementRange> placement_range(std::size_t series_length, const WindowSpec& spec);

struct PlacementSplit {
  std::optional<PlacementRange> train;
  std::optional<PlacementRange> validation;
};

// Chronological split: the latest `validation_fraction` of placements
// (at least one when there are two or more) validate, the rest train.
PlacementSplit split_placements(const PlacementRange& range, double validation_fraction);

// Training and validation placements plus covariate statistics for a panel.
struct DatasetPlan {
  WindowSpec spec;
  std::vector<std::optional<PlacementRange>> train;
  std::vector<std::optional<PlacementRange>> validation;
  std::vector<std::size_t> skipped;  // series too short for any window
  Standardizer standardizer;
};

DatasetPlan plan_dataset(const Panel& panel, const WindowSpec& spec,
                         double validation_fraction = 0.1);

// Mean and standard deviation of each covariate over every step of every
// training window, with overlapping windows counted once per window.
Standardizer fit_standardizer(const Panel& panel, const WindowSpec& spec,
                              std::span<const std::optional<PlacementRange>> train);

struct TrainingWindow {
  std::size_t series_index = 0;
  long start = 0;
  std::size_t conditioning_length = 0;
  std::vector<double> target;  // 0 at padded and missing steps
  std::vector<StepMask> mask;
  Matrix covariates;           // total x covariate_dim, standardized
  double scale = 1.0;
  std::size_t category = 0;

  std::size_t length() const { return target.size(); }
};

TrainingWindow make_window(const TimeSeries& series, std::size_t series_index, long start,
                           const WindowSpec& spec, const Standardizer& standardizer,
                           bool use_scaling);

struct SamplerOptions {
  bool uniform_sampling = false;
  bool no_scaling = false;
};

// Draws training windows: a series with probability proportional to its
// scale (or uniformly), then a start uniformly among its training placements.
class WindowSampler {
 public:
  WindowSampler(const Panel& panel, const DatasetPlan& plan, SamplerOptions options);

  std::size_t draw_series(Rng& rng) const;
  TrainingWindow draw(Rng& rng) const;
  std::span<const double> weights() const { return weights_; }

 private:
  const Panel* panel_;
  const DatasetPlan* plan_;
  SamplerOptions options_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

struct HistogramBucket {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

// Non-empty buckets of log10(1 + mean observed value) per series.
std::vector<HistogramBucket> velocity_histogram(const Panel& panel, double bucket_width = 0.25);

}  // namespace deepar
