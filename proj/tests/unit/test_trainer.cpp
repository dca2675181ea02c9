#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "deepar/config.hpp"
#include "deepar/error.hpp"
#include "deepar/forecaster.hpp"
#include "deepar/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace deepar;
using deepar::testing::make_series;

namespace {

TrainConfig small_config(LikelihoodKind kind) {
  TrainConfig c;
  c.likelihood = kind;
  c.window = {14, 7};
  c.num_layers = 1;
  c.hidden_units = 10;
  c.embedding_dim = 2;
  c.batch_size = 16;
  c.max_batches = 60;
  c.windows_per_epoch = 160;
  c.patience = 5;
  c.seed = 3;
  return c;
}

Panel count_panel(std::uint64_t seed) {
  deepar::testing::SeasonalNegBin gen;
  gen.num_series = 20;
  gen.length = 60;
  gen.seed = seed;
  return gen.generate();
}

TrainConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "cfg.txt");
}

std::string config_error(const std::string& text) {
  try {
    parse_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults follow the tuned hyperparameters") {
  const TrainConfig c;
  CHECK(c.num_layers == 3);
  CHECK(c.hidden_units == 40);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.batch_size == 64);
  CHECK(c.grad_clip == 10.0);
}

TEST_CASE("config parsing") {
  const auto c = parse_text(
      "# comment\n"
      "likelihood = gaussian\n"
      "hidden_units = 12   # trailing comment\n"
      "\n"
      "learning_rate=0.005\n"
      "uniform_sampling = true\n"
      "conditioning_length = 30\n");
  CHECK(c.likelihood == LikelihoodKind::Gaussian);
  CHECK(c.hidden_units == 12);
  CHECK(c.learning_rate == 0.005);
  CHECK(c.uniform_sampling);
  CHECK(c.window.conditioning_length == 30);
  CHECK(c.num_layers == 3);

  CHECK(config_error("bogus = 1\n").find("cfg.txt:1") != std::string::npos);
  CHECK(config_error("seed = 1\nseed = 2\n").find("cfg.txt:2") != std::string::npos);
  CHECK_FALSE(config_error("hidden_units = ten\n").empty());
  CHECK_FALSE(config_error("hidden_units = 0\n").empty());
  CHECK_FALSE(config_error("batch_size = -3\n").empty());
  CHECK_FALSE(config_error("no equals sign\n").empty());
  CHECK_FALSE(config_error("learning_rate = nan\n").empty());
}

TEST_CASE("config text round trip") {
  TrainConfig c = small_config(LikelihoodKind::Gaussian);
  c.no_scaling = true;
  c.learning_rate = 0.1 + 0.2;  // not exactly representable as a short decimal
  CHECK(parse_text(to_text(c)) == c);
  CHECK(parse_text(to_text(TrainConfig{})) == TrainConfig{});
}

TEST_CASE("training is deterministic for a fixed seed and any worker count") {
  const Panel panel = count_panel(1);
  const auto c = small_config(LikelihoodKind::NegativeBinomial);
  const auto a = train(panel, c);
  const auto b = train(panel, c);
  const auto d = train(panel, c, {3});
  CHECK(a.model == b.model);
  CHECK(a.model == d.model);
  REQUIRE(a.log.entries.size() == b.log.entries.size());
  for (std::size_t k = 0; k < a.log.entries.size(); ++k) {
    CHECK(a.log.entries[k].validation_nll == b.log.entries[k].validation_nll);
    CHECK(a.log.entries[k].validation_nll == d.log.entries[k].validation_nll);
  }
  CHECK(a.log.stop_reason == b.log.stop_reason);
}

TEST_CASE("best snapshot and batch budget") {
  const Panel panel = count_panel(2);
  auto c = small_config(LikelihoodKind::NegativeBinomial);
  const auto r = train(panel, c);
  CHECK(r.log.batches <= c.max_batches);
  double best = r.log.entries.front().validation_nll;
  for (const auto& e : r.log.entries) best = std::min(best, e.validation_nll);
  CHECK(r.log.best_validation_nll == best);

  // Re-scoring the returned parameters reproduces the logged minimum.
  const auto plan = plan_dataset(panel, c.window, c.validation_fraction);
  const auto windows = validation_windows(panel, plan, c);
  CHECK(mean_nll(r.model, windows, c.seed) == best);

  for (std::size_t k = 1; k < r.log.entries.size(); ++k) {
    CHECK(r.log.entries[k].elapsed_seconds >= r.log.entries[k - 1].elapsed_seconds);
    CHECK(r.log.entries[k].batches > r.log.entries[k - 1].batches);
  }
}

TEST_CASE("early stopping ends a stalled run") {
  const Panel panel = count_panel(3);
  auto c = small_config(LikelihoodKind::NegativeBinomial);
  c.learning_rate = 1e-20;  // updates vanish below parameter rounding
  c.patience = 2;
  c.max_batches = 500;
  const auto r = train(panel, c);
  CHECK(r.log.stop_reason == "early_stopping");
  CHECK(r.log.batches < c.max_batches);
}

TEST_CASE("constant zero panel trains toward a point mass at zero") {
  Panel panel;
  for (int i = 0; i < 6; ++i) {
    panel.push_back(make_series(std::vector<std::optional<double>>(50, 0.0),
                                "z" + std::to_string(i)));
  }
  auto c = small_config(LikelihoodKind::NegativeBinomial);
  c.learning_rate = 0.01;
  c.max_batches = 100;
  const auto r = train(panel, c);
  CHECK(r.log.best_validation_nll < r.log.initial_validation_nll());
  CHECK(r.log.best_validation_nll < 0.05);
  ForecastOptions opts;
  opts.seed = 1;
  const auto samples = forecast(panel[0], r.model, opts);
  const auto q = quantiles(samples, std::vector<double>{0.5});
  for (std::size_t h = 0; h < q.values.cols(); ++h) CHECK(q.values(0, h) == 0.0);
}

TEST_CASE("noisy sinusoid improves validation NLL by more than 20 percent") {
  const Panel panel = deepar::testing::noisy_sinusoid(100, 70, 5);
  auto c = small_config(LikelihoodKind::Gaussian);
  c.hidden_units = 16;
  c.batch_size = 32;
  c.learning_rate = 0.01;
  c.max_batches = 150;
  c.windows_per_epoch = 320;
  const auto r = train(panel, c);
  MESSAGE("initial " << r.log.initial_validation_nll() << " best " << r.log.best_validation_nll);
  CHECK(r.log.best_validation_nll < 0.8 * r.log.initial_validation_nll());
}

TEST_CASE("identical panels shifted by whole weeks give identical models") {
  const Panel panel = count_panel(4);
  Panel shifted = panel;
  for (auto& s : shifted) s.start += std::chrono::days{7 * 5};
  const auto c = small_config(LikelihoodKind::NegativeBinomial);
  const auto a = train(panel, c);
  const auto b = train(shifted, c);
  CHECK(a.model == b.model);
  CHECK(a.log.best_validation_nll == b.log.best_validation_nll);
}

TEST_CASE("grid search") {
  const Panel panel = count_panel(5);
  const auto base = small_config(LikelihoodKind::NegativeBinomial);

  SUBCASE("a single candidate is returned unchanged") {
    const std::vector<TrainConfig> one{base};
    const auto g = grid_search(panel, one);
    CHECK(g.best_index == 0);
    CHECK(g.candidates[0].config == base);
    CHECK(g.best.model == train(panel, base).model);
  }

  SUBCASE("a sabotaged learning rate loses") {
    auto bad = base;
    bad.learning_rate = 10.0;
    const std::vector<TrainConfig> two{bad, base};
    const auto g = grid_search(panel, two);
    CHECK(g.best_index == 1);
    CHECK(g.candidates.size() == 2);
    const auto again = grid_search(panel, two);
    CHECK(again.best_index == g.best_index);
    CHECK(again.candidates[0].validation_nll == g.candidates[0].validation_nll);
  }

  SUBCASE("ties prefer fewer parameters") {
    const std::vector<std::size_t> hidden{12, 6};
    const std::vector<std::size_t> emb{2};
    const auto configs = grid_candidates(base, hidden, emb);
    REQUIRE(configs.size() == 2);
    CHECK(configs[1].hidden_units == 6);
    auto frozen = configs;
    for (auto& f : frozen) {
      f.learning_rate = 1e-12;
      f.max_batches = 1;
    }
    frozen[1].hidden_units = frozen[0].hidden_units;
    frozen[1].embedding_dim = 1;
    const auto g = grid_search(panel, frozen);
    CAPTURE(g.candidates[0].validation_nll);
    CAPTURE(g.candidates[1].validation_nll);
    if (g.candidates[0].validation_nll == g.candidates[1].validation_nll) {
      CHECK(g.best_index == 1);
    }
  }

  SUBCASE("all candidates diverging is an error") {
    auto broken = base;
    broken.learning_rate = 1e300;
    broken.grad_clip = 1e300;
    const std::vector<TrainConfig> only{broken};
    CHECK_THROWS_AS(grid_search(panel, only), NumericError);
  }

  CHECK_THROWS_AS(grid_candidates(base, std::vector<std::size_t>{}, std::vector<std::size_t>{2}),
                  ConfigError);
}
