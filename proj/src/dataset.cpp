#include "deepar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "deepar/error.hpp"
#include "deepar/random.hpp"
#include "json.hpp"

namespace deepar {

std::size_t TimeSeries::observed_count() const {
  return static_cast<std::size_t>(
      std::count_if(target.begin(), target.end(), [](const auto& v) { return v.has_value(); }));
}

namespace {

TimeSeries parse_record(const nlohmann::json& obj, std::size_t line_no) {
  const auto where = [&](const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
  };
  if (!obj.is_object()) {
    throw DataError(where("expected a JSON object"));
  }
  for (const char* key : {"id", "start", "freq", "target"}) {
    if (!obj.contains(key)) {
      throw DataError(where(std::string("missing key '") + key + "'"));
    }
  }
  TimeSeries s;
  s.id = obj.at("id").is_string() ? obj.at("id").get<std::string>() : obj.at("id").dump();
  try {
    s.start = parse_timestamp(obj.at("start").get<std::string>());
    s.freq = parse_granularity(obj.at("freq").get<std::string>());
  } catch (const DataError& e) {
    throw DataError(where(e.what()));
  } catch (const nlohmann::json::exception&) {
    throw DataError(where("'start' and 'freq' must be strings"));
  }
  if (obj.contains("cat")) {
    const auto& cat = obj.at("cat");
    if (!cat.is_number_integer() || cat.get<long long>() < 0) {
      throw DataError(where("'cat' must be a non-negative integer"));
    }
    s.category = cat.get<std::size_t>();
  }
  const auto& target = obj.at("target");
  if (!target.is_array()) {
    throw DataError(where("'target' must be an array"));
  }
  s.target.reserve(target.size());
  for (const auto& v : target) {
    if (v.is_null()) {
      s.target.emplace_back(std::nullopt);
      continue;
    }
    if (!v.is_number()) {
      throw DataError(where("series '" + s.id + "': target entries must be numbers or null"));
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0) {
      std::ostringstream msg;
      msg << "series '" << s.id << "': target value " << x << " is negative or not finite";
      throw DataError(where(msg.str()));
    }
    s.target.emplace_back(x);
  }
  if (s.observed_count() == 0) {
    throw DataError(where("series '" + s.id + "' has no observed values"));
  }
  return s;
}

}  // namespace

Panel parse_jsonl(std::istream& in, const std::string& source) {
  Panel panel;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source + ": line " + std::to_string(line_no) + ": malformed JSON (" +
                      e.what() + ")");
    }
    try {
      panel.push_back(parse_record(obj, line_no));
    } catch (const DataError& e) {
      throw DataError(source + ": " + e.what());
    }
    if (panel.back().freq != panel.front().freq) {
      throw DataError(source + ": line " + std::to_string(line_no) +
                      ": mixed granularities in one panel (" +
                      std::string(granularity_code(panel.front().freq)) + " and " +
                      std::string(granularity_code(panel.back().freq)) + ")");
    }
  }
  if (panel.empty()) {
    throw DataError(source + ": empty panel");
  }
  return panel;
}

Panel load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  return parse_jsonl(in, path.string());
}

void write_jsonl(std::ostream& out, const Panel& panel) {
  for (const auto& s : panel) {
    nlohmann::json target = nlohmann::json::array();
    for (const auto& v : s.target) {
      target.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    }
    nlohmann::ordered_json obj;
    obj["id"] = s.id;
    obj["start"] = format_timestamp(s.start);
    obj["freq"] = std::string(granularity_code(s.freq));
    obj["target"] = std::move(target);
    obj["cat"] = s.category;
    out << obj.dump() << '\n';
  }
}

void validate_for_likelihood(const Panel& panel, LikelihoodKind kind) {
  if (kind != LikelihoodKind::NegativeBinomial) {
    return;
  }
  for (const auto& s : panel) {
    for (std::size_t t = 0; t < s.target.size(); ++t) {
      if (s.target[t] && std::floor(*s.target[t]) != *s.target[t]) {
        std::ostringstream msg;
        msg << "series '" << s.id << "' step " << t << ": value " << *s.target[t]
            << " is not an integer count, which the negbin likelihood requires";
        throw DataError(msg.str());
      }
    }
  }
}

std::size_t category_count(const Panel& panel) {
  std::size_t n = 0;
  for (const auto& s : panel) {
    n = std::max(n, s.category + 1);
  }
  return n;
}

void WindowSpec::validate() const {
  if (conditioning_length < 1 || prediction_length < 1) {
    throw ConfigError("conditioning_length and prediction_length must both be at least 1");
  }
}

double compute_scale(std::span<const double> conditioning) {
  if (conditioning.empty()) {
    return 1.0;
  }
  double sum = 0.0;
  for (double v : conditioning) {
    sum += v;
  }
  return 1.0 + sum / static_cast<double>(conditioning.size());
}

double compute_scale(std::span<const std::optional<double>> conditioning) {
  std::vector<double> values;
  values.reserve(conditioning.size());
  for (const auto& v : conditioning) {
    values.push_back(v.value_or(0.0));
  }
  return compute_scale(values);
}

double series_scale(const TimeSeries& series) { return compute_scale(series.target); }

std::size_t covariate_dim(Granularity g) { return 1 + calendar_feature_count(g); }

Matrix raw_covariates(const TimeSeries& series, long first_index, std::size_t length) {
  const std::size_t dim = covariate_dim(series.freq);
  Matrix out(length, dim);
  for (std::size_t k = 0; k < length; ++k) {
    const long index = first_index + static_cast<long>(k);
    auto row = out.row(k);
    row[0] = static_cast<double>(index);
    calendar_features(advance(series.start, series.freq, index), series.freq, row.subspan(1));
  }
  return out;
}

void Standardizer::apply(Matrix& covariates) const {
  if (covariates.cols() != mean.size()) {
    throw ConfigError("standardizer has " + std::to_string(mean.size()) +
                      " features, covariates have " + std::to_string(covariates.cols()));
  }
  for (std::size_t r = 0; r < covariates.rows(); ++r) {
    auto row = covariates.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] = (row[c] - mean[c]) / stddev[c];
    }
  }
}

Matrix build_covariates(const TimeSeries& series, long first_index, std::size_t length,
                        const Standardizer& standardizer) {
  Matrix out = raw_covariates(series, first_index, length);
  standardizer.apply(out);
  return out;
}

std::optional<PlacementRange> placement_range(std::size_t series_length, const WindowSpec& spec) {
  if (series_length < spec.prediction_length) {
    return std::nullopt;
  }
  return PlacementRange{-static_cast<long>(spec.conditioning_length),
                        static_cast<long>(series_length) - static_cast<long>(spec.total())};
}

PlacementSplit split_placements(const PlacementRange& range, double validation_fraction) {
  const std::size_t n = range.count();
  std::size_t n_val = 0;
  if (n >= 2 && validation_fraction > 0.0) {
    n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * validation_fraction)));
    n_val = std::min(n_val, n - 1);
  }
  PlacementSplit split;
  split.train = PlacementRange{range.first, range.last - static_cast<long>(n_val)};
  if (n_val > 0) {
    split.validation = PlacementRange{range.last - static_cast<long>(n_val) + 1, range.last};
  }
  return split;
}

Standardizer fit_standardizer(const Panel& panel, const WindowSpec& spec,
                              std::span<const std::optional<PlacementRange>> train) {
  if (panel.empty()) {
    throw DataError("cannot fit covariate statistics on an empty panel");
  }
  const std::size_t dim = covariate_dim(panel.front().freq);
  const long total = static_cast<long>(spec.total());
  std::vector<double> weight_sum(1, 0.0);
  std::vector<double> sum(dim, 0.0);
  std::vector<double> sq(dim, 0.0);

  // Pass 1: weighted sums. An index j is covered by placements s with
  // max(first, j - T + 1) <= s <= min(last, j).
  struct Covered {
    Matrix raw;
    std::vector<double> weight;
  };
  std::vector<Covered> covered(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (!train[i]) {
      continue;
    }
    const auto& r = *train[i];
    const long lo = r.first;
    const long hi = r.last + total - 1;
    covered[i].raw = raw_covariates(panel[i], lo, static_cast<std::size_t>(hi - lo + 1));
    covered[i].weight.resize(static_cast<std::size_t>(hi - lo + 1));
    for (long j = lo; j <= hi; ++j) {
      const long count = std::min(r.last, j) - std::max(r.first, j - total + 1) + 1;
      const double w = static_cast<double>(std::max(0L, count));
      covered[i].weight[static_cast<std::size_t>(j - lo)] = w;
      weight_sum[0] += w;
      const auto row = covered[i].raw.row(static_cast<std::size_t>(j - lo));
      for (std::size_t c = 0; c < dim; ++c) {
        sum[c] += w * row[c];
      }
    }
  }
  if (weight_sum[0] == 0.0) {
    throw DataError("no series is long enough for a single training window");
  }
  Standardizer st;
  st.mean.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    st.mean[c] = sum[c] / weight_sum[0];
  }
  for (const auto& cov : covered) {
    for (std::size_t k = 0; k < cov.weight.size(); ++k) {
      const auto row = cov.raw.row(k);
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = row[c] - st.mean[c];
        sq[c] += cov.weight[k] * d * d;
      }
    }
  }
  st.stddev.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    const double sd = std::sqrt(sq[c] / weight_sum[0]);
    st.stddev[c] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

DatasetPlan plan_dataset(const Panel& panel, const WindowSpec& spec, double validation_fraction) {
  spec.validate();
  DatasetPlan plan;
  plan.spec = spec;
  plan.train.resize(panel.size());
  plan.validation.resize(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto range = placement_range(panel[i].length(), spec);
    if (!range) {
      plan.skipped.push_back(i);
      continue;
    }
    const auto split = split_placements(*range, validation_fraction);
    plan.train[i] = split.train;
    plan.validation[i] = split.validation;
  }
  plan.standardizer = fit_standardizer(panel, spec, plan.train);
  return plan;
}

TrainingWindow make_window(const TimeSeries& series, std::size_t series_index, long start,
                           const WindowSpec& spec, const Standardizer& standardizer,
                           bool use_scaling) {
  const std::size_t total = spec.total();
  TrainingWindow w;
  w.series_index = series_index;
  w.start = start;
  w.conditioning_length = spec.conditioning_length;
  w.category = series.category;
  w.target.assign(total, 0.0);
  w.mask.assign(total, StepMask::Padded);
  for (std::size_t k = 0; k < total; ++k) {
    const long index = start + static_cast<long>(k);
    if (index < 0) {
      continue;
    }
    if (index >= static_cast<long>(series.length())) {
      throw DataError("window for series '" + series.id + "' extends past the last observation");
    }
    const auto& v = series.target[static_cast<std::size_t>(index)];
    if (v) {
      w.target[k] = *v;
      w.mask[k] = StepMask::Observed;
    } else {
      w.mask[k] = StepMask::Missing;
    }
  }
  w.scale = use_scaling
                ? compute_scale(std::span<const double>(w.target).first(spec.conditioning_length))
                : 1.0;
  w.covariates = build_covariates(series, start, total, standardizer);
  return w;
}

WindowSampler::WindowSampler(const Panel& panel, const DatasetPlan& plan, SamplerOptions options)
    : panel_(&panel), plan_(&plan), options_(options) {
  weights_.resize(panel.size(), 0.0);
  double acc = 0.0;
  cumulative_.resize(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (plan.train[i]) {
      weights_[i] = options.uniform_sampling ? 1.0 : series_scale(panel[i]);
    }
    acc += weights_[i];
    cumulative_[i] = acc;
  }
  if (acc <= 0.0) {
    throw DataError("no series has a valid training window");
  }
}

std::size_t WindowSampler::draw_series(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  auto index = static_cast<std::size_t>(it - cumulative_.begin());
  index = std::min(index, cumulative_.size() - 1);
  while (weights_[index] == 0.0) {
    // u landed exactly on a boundary shared with an empty series
    ++index;
  }
  return index;
}

TrainingWindow WindowSampler::draw(Rng& rng) const {
  const std::size_t i = draw_series(rng);
  const auto& range = *plan_->train[i];
  const long start = range.first + static_cast<long>(rng.uniform_index(range.count()));
  return make_window((*panel_)[i], i, start, plan_->spec, plan_->standardizer,
                     !options_.no_scaling);
}

std::vector<HistogramBucket> velocity_histogram(const Panel& panel, double bucket_width) {
  if (panel.empty()) {
    throw DataError("velocity histogram of an empty panel");
  }
  if (!(bucket_width > 0.0)) {
    throw ConfigError("bucket width must be positive");
  }
  std::map<long, std::size_t> counts;
  for (const auto& s : panel) {
    double sum = 0.0;
    for (const auto& v : s.target) {
      sum += v.value_or(0.0);
    }
    const double mean = sum / static_cast<double>(s.observed_count());
    const double position = std::log10(1.0 + mean) / bucket_width;
    ++counts[static_cast<long>(std::floor(position + 1e-9))];
  }
  std::vector<HistogramBucket> out;
  for (const auto& [bucket, count] : counts) {
    out.push_back({static_cast<double>(bucket) * bucket_width,
                   static_cast<double>(bucket + 1) * bucket_width, count});
  }
  return out;
}

}  // namespace deepar
