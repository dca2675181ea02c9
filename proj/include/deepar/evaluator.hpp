#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deepar/dataset.hpp"
#include "deepar/matrix.hpp"
#include "deepar/network.hpp"

namespace deepar {

// 2 (Zhat - Z) (rho 1[Zhat > Z] - (1 - rho) 1[Zhat <= Z])
double quantile_loss(double truth, double forecast, double rho);

// Evaluation interval [lead, lead + length) counted from the forecast start.
struct Span {
  std::size_t lead = 0;
  std::size_t length = 1;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// "0:1,2:1,0:8" -> {(0,1), (2,1), (0,8)}
std::vector<Span> parse_spans(std::string_view text);
std::string format_span(const Span& span);

// sum_i L_rho(Z_i, Zhat_i) / sum_i Z_i; DomainError when sum_i Z_i == 0.
double rho_risk(std::span<const double> truth, std::span<const double> forecast, double rho);

// rho-risk of span aggregates computed from sample paths.
double rho_risk(std::span<const std::vector<double>> truths, std::span<const Matrix> paths,
                const Span& span, double rho);

// Average rho-risk of the one-step marginals [L, L+1) for L < k.
double all_k_risk(std::span<const std::vector<double>> truths, std::span<const Matrix> paths,
                  std::size_t k, double rho);

struct NdRmse {
  double nd = 0.0;
  double rmse = 0.0;
};

// Sums run over every item and step; `truths[i]` and `medians[i]` align.
NdRmse nd_rmse(std::span<const std::vector<double>> truths,
               std::span<const std::vector<double>> medians);

// Fraction of items whose span-aggregated level-p quantile is strictly
// greater than the span-aggregated truth, for each level.
std::vector<double> coverage(std::span<const std::vector<double>> truths,
                             std::span<const Matrix> paths, std::span<const double> levels,
                             const Span& span);

// zhat_{n+h} = z_{n+h-season}, repeating the last season.
std::vector<double> seasonal_naive(std::span<const double> history, std::size_t horizon,
                                   std::size_t season);

// One forecast to score: the realized values over the horizon and either the
// sample paths or per-step quantiles (which only support one-step spans).
struct EvalItem {
  std::string id;
  std::vector<double> truth;
  Matrix paths;                                  // empty when samples were not kept
  std::map<double, std::vector<double>> quantiles;
};

struct EvalSpec {
  std::vector<Span> spans{{0, 1}};
  std::vector<double> levels{0.5, 0.9};
  bool coverage = false;
  std::vector<double> coverage_levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct SpanRisk {
  Span span;
  double level = 0.0;
  double risk = 0.0;
};

struct CoverageCurve {
  Span span;
  std::vector<double> levels;
  std::vector<double> values;
};

struct MetricReport {
  std::size_t items = 0;
  std::vector<SpanRisk> risks;
  std::vector<SpanRisk> all_k;  // span.length holds K
  double nd = 0.0;
  double rmse = 0.0;
  std::vector<CoverageCurve> coverage;

  std::string to_json() const;
  void write_table(std::ostream& out) const;
  void write_coverage_tsv(std::ostream& out) const;
};

MetricReport evaluate(std::span<const EvalItem> items, const EvalSpec& spec);

struct RollingSpec {
  std::size_t windows = 1;
  std::size_t stride = 1;
  std::size_t horizon = 0;  // 0 = model prediction length
  std::size_t num_samples = 200;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  EvalSpec eval;
};

struct BacktestReport {
  std::vector<MetricReport> windows;
  MetricReport pooled;
  std::vector<std::vector<EvalItem>> items;  // per window, kept for inspection
};

// Forecast start of window k for a series of length n:
// n - horizon - (windows - 1 - k) * stride.
long rolling_start(std::size_t series_length, const RollingSpec& spec, std::size_t horizon,
                   std::size_t k);

// Re-conditions one trained model at each window start (never retrains) and
// scores every window; `pooled` scores all windows' items together.
BacktestReport rolling_backtest(const Panel& panel, const ModelParams& model,
                                const RollingSpec& spec);

}  // namespace deepar
