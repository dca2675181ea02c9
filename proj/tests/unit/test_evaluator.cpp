#include <cmath>
#include <sstream>

#include "doctest.h"
#include "deepar/error.hpp"
#include "deepar/evaluator.hpp"
#include "deepar/forecaster.hpp"
#include "deepar/random.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"

using namespace deepar;
using deepar::testing::constant_model;
using deepar::testing::make_series;

namespace {

// n samples of Normal(mean, sd) per step.
Matrix normal_paths(Rng& rng, std::size_t n, std::size_t horizon, double mean, double sd) {
  Matrix m(n, horizon);
  for (double& v : m.values()) v = mean + sd * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("quantile loss as displayed") {
  CHECK(quantile_loss(10.0, 12.0, 0.9) == doctest::Approx(3.6));
  CHECK(quantile_loss(10.0, 8.0, 0.9) == doctest::Approx(0.4));
  CHECK(quantile_loss(10.0, 10.0, 0.9) == 0.0);
  CHECK(quantile_loss(10.0, 12.0, 0.5) == doctest::Approx(2.0));
  CHECK(quantile_loss(10.0, 8.0, 0.5) == doctest::Approx(2.0));
  const std::vector<double> z{10.0}, zhat{12.0};
  CHECK(rho_risk(z, zhat, 0.9) == doctest::Approx(0.36));
  const std::vector<double> zeros{0.0, 0.0}, any{1.0, 2.0};
  CHECK_THROWS_AS(rho_risk(zeros, any, 0.5), DomainError);
  CHECK_THROWS_AS(rho_risk(z, any, 0.5), DomainError);
}

TEST_CASE("quantile loss is non-negative for every level") {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double rho = 0.01 + 0.98 * rng.uniform();
    CHECK(quantile_loss(10.0 * rng.normal(), 10.0 * rng.normal(), rho) >= 0.0);
  }
}

TEST_CASE("rho-risk of span aggregates and all(K)") {
  std::vector<std::vector<double>> truths{{1, 2, 3}, {2, 2, 2}};
  Matrix a(1, 3), b(1, 3);
  a(0, 0) = 1; a(0, 1) = 3; a(0, 2) = 3;
  b(0, 0) = 2; b(0, 1) = 2; b(0, 2) = 0;
  const std::vector<Matrix> paths{a, b};
  // Span 0:3: truths 6 and 6, forecasts 7 and 4.
  const double expected = (quantile_loss(6, 7, 0.5) + quantile_loss(6, 4, 0.5)) / 12.0;
  CHECK(rho_risk(truths, paths, Span{0, 3}, 0.5) == doctest::Approx(expected));
  // One-step risks at rho = 0.5: lead 0 -> 0, lead 1 -> 1/4, lead 2 -> 2/5.
  CHECK(all_k_risk(truths, paths, 2, 0.5) == doctest::Approx(0.125));
  CHECK(all_k_risk(truths, paths, 3, 0.5) == doctest::Approx((0.25 + 0.4) / 3.0));
  CHECK_THROWS_AS(rho_risk(truths, paths, Span{2, 2}, 0.5), DomainError);
}

TEST_CASE("ND and RMSE") {
  const std::vector<std::vector<double>> truths{{1, 2}, {3, 4}};
  const std::vector<std::vector<double>> medians{{1, 2}, {3, 2}};
  const auto r = nd_rmse(truths, medians);
  CHECK(r.nd == doctest::Approx(0.2));
  CHECK(r.rmse == doctest::Approx(0.4));
  const std::vector<std::vector<double>> halves{{1, 1}, {1, 1}};
  const std::vector<std::vector<double>> ones{{2, 2}, {2, 2}};
  const auto h = nd_rmse(ones, halves);
  CHECK(h.nd == doctest::Approx(0.5));
  CHECK(h.rmse == doctest::Approx(0.5));
  const std::vector<std::vector<double>> zero{{0, 0}, {0, 0}};
  CHECK_THROWS_AS(nd_rmse(zero, halves), DomainError);
}

TEST_CASE("ND equals the 0.5-risk over pooled one-step errors") {
  Rng rng(2);
  std::vector<EvalItem> items;
  for (int i = 0; i < 20; ++i) {
    EvalItem item;
    item.id = std::to_string(i);
    item.paths = normal_paths(rng, 51, 4, 10.0, 2.0);
    for (int h = 0; h < 4; ++h) item.truth.push_back(10.0 + 3.0 * rng.normal());
    items.push_back(item);
  }
  EvalSpec spec;
  spec.levels = {0.5};
  const auto report = evaluate(items, spec);
  std::vector<double> z, zhat;
  for (const auto& item : items) {
    const auto q = quantiles(ForecastSamples{item.id, {}, Granularity::Daily, item.paths, 0},
                             std::vector<double>{0.5});
    for (std::size_t h = 0; h < 4; ++h) {
      z.push_back(item.truth[h]);
      zhat.push_back(q.values(0, h));
    }
  }
  CHECK(report.nd == doctest::Approx(rho_risk(z, zhat, 0.5)).epsilon(1e-12));
  CHECK(report.items == 20);
  REQUIRE(report.all_k.size() == 1);
  CHECK(report.all_k[0].span.length == 4);
}

TEST_CASE("coverage") {
  Rng rng(3);
  SUBCASE("infinitely high forecasts always cover") {
    std::vector<std::vector<double>> truths{{1.0}, {5.0}};
    Matrix inf(3, 1);
    inf.fill(std::numeric_limits<double>::infinity());
    const std::vector<Matrix> paths{inf, inf};
    const std::vector<double> levels{0.1, 0.9};
    CHECK(coverage(truths, paths, levels, Span{0, 1}) == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("truths drawn from the forecast distribution are calibrated") {
    std::vector<std::vector<double>> truths;
    std::vector<Matrix> paths;
    for (int i = 0; i < 1000; ++i) {
      const double mean = 10.0 * rng.normal();
      const double sd = 0.5 + rng.uniform();
      paths.push_back(normal_paths(rng, 400, 3, mean, sd));
      truths.push_back({mean + sd * rng.normal(), mean + sd * rng.normal(),
                        mean + sd * rng.normal()});
    }
    const std::vector<double> levels{0.1, 0.3, 0.5, 0.7, 0.9};
    const auto one = coverage(truths, paths, levels, Span{1, 1});
    for (std::size_t l = 0; l < levels.size(); ++l) {
      CAPTURE(levels[l]);
      CHECK(std::abs(one[l] - levels[l]) < 0.05);
    }
    // With independent steps the shuffled aggregates are still calibrated.
    const auto span = coverage(truths, paths, levels, Span{0, 3});
    for (std::size_t l = 0; l < levels.size(); ++l) CHECK(std::abs(span[l] - levels[l]) < 0.05);
  }
  SUBCASE("shuffling does not change one-step coverage") {
    std::vector<std::vector<double>> truths;
    std::vector<Matrix> paths, shuffled;
    for (int i = 0; i < 50; ++i) {
      truths.push_back({rng.normal(), rng.normal()});
      paths.push_back(normal_paths(rng, 100, 2, 0.0, 1.0));
      shuffled.push_back(
          shuffle_paths(ForecastSamples{"", {}, Granularity::Daily, paths.back(), 0}, i).paths);
    }
    const std::vector<double> levels{0.2, 0.5, 0.8};
    CHECK(coverage(truths, paths, levels, Span{1, 1}) ==
          coverage(truths, shuffled, levels, Span{1, 1}));
  }
}

TEST_CASE("the true median has lower 0.5-risk than a biased one") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    std::vector<double> z, oracle, biased;
    for (int i = 0; i < 500; ++i) {
      const double mean = 20.0 + 5.0 * rng.uniform();
      z.push_back(mean + 2.0 * rng.normal());
      oracle.push_back(mean);
      biased.push_back(mean + 1.0);
    }
    CAPTURE(seed);
    CHECK(rho_risk(z, oracle, 0.5) < rho_risk(z, biased, 0.5));
  }
}

TEST_CASE("seasonal naive") {
  const std::vector<double> h{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(seasonal_naive(h, 5, 3) == std::vector<double>{7, 8, 9, 7, 8});
  CHECK(seasonal_naive(h, 2, 1) == std::vector<double>{9, 9});
  CHECK_THROWS_AS(seasonal_naive(h, 2, 10), DomainError);
  CHECK_THROWS_AS(seasonal_naive(h, 2, 0), DomainError);
}

TEST_CASE("span parsing") {
  CHECK(parse_spans("0:1,2:1,0:8") == std::vector<Span>{{0, 1}, {2, 1}, {0, 8}});
  CHECK(format_span({3, 4}) == "3:4");
  CHECK_THROWS_AS(parse_spans(""), ConfigError);
  CHECK_THROWS_AS(parse_spans("1"), ConfigError);
  CHECK_THROWS_AS(parse_spans("1:0"), ConfigError);
  CHECK_THROWS_AS(parse_spans("a:1"), ConfigError);
  CHECK_THROWS_AS(parse_spans("0:1,"), ConfigError);
}

TEST_CASE("evaluate from stored quantiles and its errors") {
  EvalItem item;
  item.id = "a";
  item.truth = {2.0, 4.0};
  item.quantiles[0.5] = {2.0, 4.0};
  item.quantiles[0.9] = {3.0, 5.0};
  const std::vector<EvalItem> items{item};
  EvalSpec spec;
  const auto report = evaluate(items, spec);
  CHECK(report.nd == 0.0);
  CHECK(report.rmse == 0.0);
  REQUIRE(report.risks.size() == 2);
  CHECK(report.risks[0].risk == 0.0);
  CHECK(report.risks[1].risk == doctest::Approx(2.0 * 1.0 * 0.9 / 2.0));

  spec.coverage = true;
  try {
    evaluate(items, spec);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("--emit-samples") != std::string::npos);
  }
  spec.coverage = false;
  spec.spans = {{0, 2}};
  CHECK_THROWS_AS(evaluate(items, spec), DataError);
  spec.spans = {{0, 1}};
  spec.levels = {0.1};
  CHECK_THROWS_AS(evaluate(items, spec), DataError);
  CHECK_THROWS_AS(evaluate(std::vector<EvalItem>{}, EvalSpec{}), DomainError);

  const auto json = nlohmann::json::parse(report.to_json());
  CHECK(json["items"] == 1);
  CHECK(json["rho_risk"].size() == 2);
  std::ostringstream table;
  report.write_table(table);
  CHECK(table.str().find("ND:") != std::string::npos);
}

TEST_CASE("a perfect constant model scores zero error") {
  Panel panel;
  for (int i = 0; i < 3; ++i) {
    panel.push_back(make_series(std::vector<std::optional<double>>(40, 5.0),
                                "c" + std::to_string(i)));
  }
  const auto model = constant_model(panel, 5.0, {10, 4});
  RollingSpec spec;
  spec.windows = 3;
  spec.stride = 4;
  spec.num_samples = 20;
  const auto r = rolling_backtest(panel, model, spec);
  CHECK(r.pooled.nd < 1e-4);
  CHECK(r.pooled.rmse < 1e-4);
  CHECK(r.windows.size() == 3);
  CHECK(r.pooled.items == 9);
}

TEST_CASE("rolling backtest") {
  const auto m = deepar::testing::tiny_model(LikelihoodKind::NegativeBinomial, 1, 5, 2, {8, 4}, 6);
  RollingSpec spec;
  spec.num_samples = 30;
  spec.seed = 4;
  spec.eval.levels = {0.5};

  SUBCASE("one window matches a direct forecast") {
    const auto r = rolling_backtest(m.panel, m.params, spec);
    REQUIRE(r.windows.size() == 1);
    for (std::size_t i = 0; i < m.panel.size(); ++i) {
      ForecastOptions opts{30, 4, 4, 1};
      const auto direct = forecast(m.panel[i], m.params, opts, 26);
      CHECK(r.items[0][i].paths == direct.paths);
    }
    CHECK(r.pooled.nd == r.windows[0].nd);
  }

  SUBCASE("pooled metrics score the concatenated windows") {
    spec.windows = 4;
    spec.stride = 2;
    const auto r = rolling_backtest(m.panel, m.params, spec);
    CHECK(rolling_start(30, spec, 4, 0) == 20);
    CHECK(rolling_start(30, spec, 4, 3) == 26);
    std::vector<EvalItem> all;
    for (const auto& w : r.items) all.insert(all.end(), w.begin(), w.end());
    const auto direct = evaluate(all, spec.eval);
    CHECK(r.pooled.nd == direct.nd);
    CHECK(r.pooled.rmse == direct.rmse);
    CHECK(r.pooled.items == 8);
  }

  SUBCASE("too little history is reported") {
    spec.windows = 20;
    spec.stride = 2;
    try {
      rolling_backtest(m.panel, m.params, spec);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'s0'") != std::string::npos);
    }
  }
}
