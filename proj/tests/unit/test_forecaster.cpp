#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "deepar/error.hpp"
#include "deepar/forecaster.hpp"
#include "deepar/random.hpp"
#include "deepar/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace deepar;
using deepar::testing::constant_model;
using deepar::testing::make_series;

namespace {

Panel constant_panel(double level, std::size_t length = 40) {
  return {make_series(std::vector<std::optional<double>>(length, level), "c")};
}

ForecastSamples samples_from(Matrix paths) {
  ForecastSamples s;
  s.id = "x";
  s.paths = std::move(paths);
  return s;
}

double variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("empirical quantile is nearest rank") {
  std::vector<double> v(200);
  std::iota(v.begin(), v.end(), 1.0);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(4));
  CHECK(empirical_quantile(v, 0.5) == 100.0);  // index 99
  CHECK(empirical_quantile(v, 0.9) == 180.0);
  CHECK(empirical_quantile(v, 0.001) == 1.0);
  CHECK(empirical_quantile(v, 0.999) == 200.0);
  CHECK(empirical_quantile({7.0}, 0.5) == 7.0);
  CHECK(empirical_quantile({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0}, 0.3) == 3.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), DomainError);
  CHECK_THROWS_AS(empirical_quantile(v, 0.0), DomainError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.0), DomainError);
}

TEST_CASE("span aggregates sum each path before taking the quantile") {
  Matrix ones(5, 4);
  ones.fill(1.0);
  const auto s = samples_from(ones);
  CHECK(span_aggregate(s, 0, 3, 0.5) == 3.0);
  CHECK(span_aggregate(s, 2, 2, 0.5) == 2.0);
  CHECK_THROWS(span_sums(ones, 3, 2));

  Matrix paths(3, 2);
  paths(0, 0) = 1; paths(0, 1) = 10;
  paths(1, 0) = 2; paths(1, 1) = 0;
  paths(2, 0) = 3; paths(2, 1) = 5;
  CHECK(span_sums(paths, 0, 2) == std::vector<double>{11, 2, 8});
}

TEST_CASE("quantiles returns only requested levels") {
  Matrix paths(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    paths(i, 0) = static_cast<double>(i);
    paths(i, 1) = static_cast<double>(10 - i);
  }
  const std::vector<double> levels{0.5};
  const auto q = quantiles(samples_from(paths), levels);
  CHECK(q.values.rows() == 1);
  CHECK(q.values(0, 0) == 4.0);
  CHECK(q.values(0, 1) == 5.0);
}

TEST_CASE("shuffling keeps marginals and removes cross-step dependence") {
  Rng rng(8);
  Matrix paths(400, 6);
  for (std::size_t i = 0; i < paths.rows(); ++i) {
    const double level = 5.0 * rng.normal();
    for (std::size_t h = 0; h < paths.cols(); ++h) paths(i, h) = level + rng.normal();
  }
  const auto original = samples_from(paths);
  const auto shuffled = shuffle_paths(original, 3);
  for (std::size_t h = 0; h < paths.cols(); ++h) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < paths.rows(); ++i) {
      a.push_back(paths(i, h));
      b.push_back(shuffled.paths(i, h));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
  const double v_before = variance(span_sums(paths, 0, 6));
  const double v_after = variance(span_sums(shuffled.paths, 0, 6));
  CHECK(v_after < 0.25 * v_before);
  CHECK(shuffle_paths(original, 3).paths == shuffled.paths);

  // One-step spans are unaffected.
  const std::vector<double> levels{0.1, 0.5, 0.9};
  CHECK(quantiles(original, levels).values == quantiles(shuffled, levels).values);
}

TEST_CASE("forecast window conditions on observed history") {
  const Panel panel = constant_panel(4.0, 20);
  const WindowSpec spec{5, 3};
  const auto model = constant_model(panel, 4.0, spec);
  TimeSeries s = panel[0];
  s.target[17] = 9.0;
  s.target[16].reset();
  const auto w = forecast_window(s, 18, 4, model);
  CHECK(w.length() == 9);
  CHECK(w.conditioning_length == 5);
  CHECK(w.target[4] == 9.0);
  CHECK(w.mask[4] == StepMask::Observed);
  CHECK(w.mask[3] == StepMask::Missing);
  for (std::size_t t = 5; t < 9; ++t) CHECK(w.mask[t] == StepMask::Missing);

  const auto early = forecast_window(s, 2, 3, model);
  CHECK(early.mask[0] == StepMask::Padded);
  CHECK(early.mask[2] == StepMask::Padded);
  CHECK(early.mask[3] == StepMask::Observed);
}

TEST_CASE("a near-deterministic model reproduces the constant") {
  const Panel panel = constant_panel(7.0);
  const WindowSpec spec{10, 5};
  const auto model = constant_model(panel, 7.0, spec);
  ForecastOptions opts;
  opts.num_samples = 50;
  opts.seed = 11;
  const auto s = forecast(panel[0], model, opts);
  CHECK(s.num_samples() == 50);
  CHECK(s.horizon() == 5);
  CHECK(s.start == advance(panel[0].start, Granularity::Daily, 40));
  for (double v : s.paths.values()) CHECK(v == doctest::Approx(7.0).epsilon(1e-4));

  opts.horizon = 12;  // longer than the trained prediction length
  const auto longer = forecast(panel[0], model, opts);
  CHECK(longer.horizon() == 12);
  for (double v : longer.paths.values()) CHECK(v == doctest::Approx(7.0).epsilon(1e-4));
}

TEST_CASE("forecasts are reproducible and independent of worker count") {
  const auto m = deepar::testing::tiny_model(LikelihoodKind::NegativeBinomial, 2, 6, 2, {8, 4}, 5);
  TimeSeries s = m.panel[1];
  s.target[25].reset();  // forces per-path imputation
  ForecastOptions opts;
  opts.num_samples = 64;
  opts.seed = 99;
  const auto a = forecast(s, m.params, opts);
  opts.workers = 4;
  const auto b = forecast(s, m.params, opts);
  CHECK(a.paths == b.paths);
  opts.seed = 100;
  CHECK_FALSE(forecast(s, m.params, opts).paths == a.paths);

  // The first path does not depend on how many are drawn.
  opts.seed = 99;
  opts.num_samples = 3;
  const auto few = forecast(s, m.params, opts);
  for (std::size_t h = 0; h < few.horizon(); ++h) CHECK(few.paths(0, h) == a.paths(0, h));

  for (double v : a.paths.values()) {
    CHECK(v >= 0.0);
    CHECK(v == std::floor(v));
  }
}

TEST_CASE("forecast argument errors") {
  const Panel panel = constant_panel(2.0, 10);
  const auto model = constant_model(panel, 2.0, {4, 2});
  ForecastOptions opts;
  opts.num_samples = 0;
  CHECK_THROWS_AS(forecast(panel[0], model, opts), ConfigError);
  opts.num_samples = 5;
  auto missing = panel[0];
  for (auto& v : missing.target) v.reset();
  CHECK_THROWS_AS(forecast(missing, model, opts), DataError);
  auto hourly = panel[0];
  hourly.freq = Granularity::Hourly;
  CHECK_THROWS_AS(forecast(hourly, model, opts), DataError);
  CHECK_THROWS_AS(forecast(panel[0], model, opts, 11), DataError);
  CHECK_THROWS_AS(forecast(panel[0], model, opts, 0), DataError);
}

TEST_CASE("forecast JSONL round trip") {
  Matrix paths(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t h = 0; h < 3; ++h) paths(i, h) = 0.1 * static_cast<double>(i * 3 + h) + 1e-13;
  ForecastSamples s = samples_from(paths);
  s.id = "item \"7\"";
  s.start = parse_timestamp("2015-06-01T13:00:00");
  s.freq = Granularity::Hourly;
  s.seed = 12345678901234ULL;
  const std::vector<double> levels{0.1, 0.5, 0.9};
  std::vector<ForecastRecord> records{make_record(s, levels, true, 2), make_record(s, levels, false)};
  std::stringstream buf;
  write_forecast_jsonl(buf, records);
  const auto back = read_forecast_jsonl(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == s.id);
  CHECK(back[0].start == s.start);
  CHECK(back[0].freq == Granularity::Hourly);
  CHECK(back[0].window == 2);
  CHECK(back[0].seed == s.seed);
  CHECK(back[0].horizon == 3);
  CHECK(back[0].num_samples == 4);
  REQUIRE(back[0].samples.has_value());
  CHECK(*back[0].samples == paths);
  CHECK(back[0].quantiles == records[0].quantiles);
  CHECK(back[0].quantiles.size() == 3);
  CHECK_FALSE(back[1].samples.has_value());

  std::istringstream bad("{\"id\": 3}\n");
  CHECK_THROWS_AS(read_forecast_jsonl(bad), DataError);
}

TEST_CASE("a model trained on iid counts recovers their moments") {
  deepar::testing::OracleNegBin oracle(21);
  Panel panel;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::optional<double>> v;
    for (int t = 0; t < 80; ++t) v.emplace_back(oracle.draw(3.0, 0.5));
    panel.push_back(make_series(std::move(v), "n" + std::to_string(i)));
  }
  TrainConfig c;
  c.window = {14, 7};
  c.num_layers = 1;
  c.hidden_units = 8;
  c.embedding_dim = 1;
  c.batch_size = 32;
  c.learning_rate = 0.01;
  c.max_batches = 300;
  c.windows_per_epoch = 320;
  c.patience = 10;
  c.seed = 2;
  const auto r = train(panel, c);

  std::vector<double> pooled;
  ForecastOptions opts;
  opts.num_samples = 400;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    opts.seed = i;
    const auto s = forecast(panel[i], r.model, opts);
    pooled.insert(pooled.end(), s.paths.values().begin(), s.paths.values().end());
  }
  const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) /
                      static_cast<double>(pooled.size());
  const double var = variance(pooled);
  MESSAGE("mean " << mean << " variance " << var);
  CHECK(std::abs(mean - 3.0) < 0.3);
  CHECK(std::abs(var - 7.5) < 0.75);
}
