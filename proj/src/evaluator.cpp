#include "deepar/evaluator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "deepar/error.hpp"
#include "deepar/forecaster.hpp"
#include "json.hpp"

namespace deepar {

double quantile_loss(double truth, double forecast, double rho) {
  const double indicator = forecast > truth ? rho : -(1.0 - rho);
  return 2.0 * (forecast - truth) * indicator;
}

std::vector<Span> parse_spans(std::string_view text) {
  if (!text.empty() && text.back() == ',') {
    throw ConfigError("span list '" + std::string(text) + "' ends with a comma");
  }
  std::vector<Span> spans;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("span '" + std::string(item) + "' must look like LEAD:LENGTH");
    }
    Span s;
    const auto parse = [&](std::string_view part, std::size_t& out) {
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
      if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty()) {
        throw ConfigError("span '" + std::string(item) + "' must look like LEAD:LENGTH");
      }
    };
    parse(item.substr(0, colon), s.lead);
    parse(item.substr(colon + 1), s.length);
    if (s.length < 1) {
      throw ConfigError("span '" + std::string(item) + "' has zero length");
    }
    spans.push_back(s);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  if (spans.empty()) {
    throw ConfigError("no spans given");
  }
  return spans;
}

std::string format_span(const Span& span) {
  return std::to_string(span.lead) + ":" + std::to_string(span.length);
}

double rho_risk(std::span<const double> truth, std::span<const double> forecast, double rho) {
  if (truth.size() != forecast.size()) {
    throw DomainError("rho_risk: truth and forecast counts differ");
  }
  double loss = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    loss += quantile_loss(truth[i], forecast[i], rho);
    total += truth[i];
  }
  if (total == 0.0) {
    throw DomainError("rho-risk is undefined when the aggregated truth sums to zero");
  }
  return loss / total;
}

namespace {

double truth_sum(const std::vector<double>& truth, const Span& span) {
  if (span.lead + span.length > truth.size()) {
    throw DomainError("span " + format_span(span) + " is outside the horizon of " +
                      std::to_string(truth.size()));
  }
  double sum = 0.0;
  for (std::size_t h = span.lead; h < span.lead + span.length; ++h) {
    sum += truth[h];
  }
  return sum;
}

void check_aligned(std::span<const std::vector<double>> truths, std::size_t n) {
  if (truths.size() != n) {
    throw DomainError("truth and forecast item counts differ");
  }
}

}  // namespace

double rho_risk(std::span<const std::vector<double>> truths, std::span<const Matrix> paths,
                const Span& span, double rho) {
  check_aligned(truths, paths.size());
  std::vector<double> z(truths.size());
  std::vector<double> zhat(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    z[i] = truth_sum(truths[i], span);
    zhat[i] = empirical_quantile(span_sums(paths[i], span.lead, span.length), rho);
  }
  return rho_risk(z, zhat, rho);
}

double all_k_risk(std::span<const std::vector<double>> truths, std::span<const Matrix> paths,
                  std::size_t k, double rho) {
  if (k < 1) {
    throw DomainError("all(K) needs K >= 1");
  }
  double sum = 0.0;
  for (std::size_t lead = 0; lead < k; ++lead) {
    sum += rho_risk(truths, paths, Span{lead, 1}, rho);
  }
  return sum / static_cast<double>(k);
}

NdRmse nd_rmse(std::span<const std::vector<double>> truths,
               std::span<const std::vector<double>> medians) {
  check_aligned(truths, medians.size());
  double abs_err = 0.0;
  double sq_err = 0.0;
  double abs_truth = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].size() != medians[i].size()) {
      throw DomainError("nd_rmse: truth and forecast lengths differ for item " +
                        std::to_string(i));
    }
    for (std::size_t t = 0; t < truths[i].size(); ++t) {
      const double e = truths[i][t] - medians[i][t];
      abs_err += std::abs(e);
      sq_err += e * e;
      abs_truth += std::abs(truths[i][t]);
      ++n;
    }
  }
  if (abs_truth == 0.0) {
    throw DomainError("ND and RMSE are undefined when every true value is zero");
  }
  const double count = static_cast<double>(n);
  return {abs_err / abs_truth, std::sqrt(sq_err / count) / (abs_truth / count)};
}

std::vector<double> coverage(std::span<const std::vector<double>> truths,
                             std::span<const Matrix> paths, std::span<const double> levels,
                             const Span& span) {
  check_aligned(truths, paths.size());
  std::vector<double> covered(levels.size(), 0.0);
  if (truths.empty()) {
    return covered;
  }
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double z = truth_sum(truths[i], span);
    const auto sums = span_sums(paths[i], span.lead, span.length);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (empirical_quantile(sums, levels[l]) > z) {
        covered[l] += 1.0;
      }
    }
  }
  for (double& c : covered) {
    c /= static_cast<double>(truths.size());
  }
  return covered;
}

std::vector<double> seasonal_naive(std::span<const double> history, std::size_t horizon,
                                   std::size_t season) {
  if (season < 1) {
    throw DomainError("season length must be at least 1");
  }
  if (history.size() < season) {
    throw DomainError("seasonal naive needs at least one season of history (" +
                      std::to_string(season) + " steps), got " + std::to_string(history.size()));
  }
  std::vector<double> out(horizon);
  const std::size_t base = history.size() - season;
  for (std::size_t h = 0; h < horizon; ++h) {
    out[h] = history[base + h % season];
  }
  return out;
}

namespace {

const std::vector<double>& stored_quantile(const EvalItem& item, double level) {
  const auto it = item.quantiles.find(level);
  if (it == item.quantiles.end()) {
    throw DataError("forecast for '" + item.id + "' has no sample paths and no stored " +
                    format_level(level) +
                    " quantile; run predict with --emit-samples or request that quantile");
  }
  return it->second;
}

double item_quantile(const EvalItem& item, const Span& span, double level) {
  if (!item.paths.empty()) {
    return empirical_quantile(span_sums(item.paths, span.lead, span.length), level);
  }
  if (span.length != 1) {
    throw DataError("span " + format_span(span) + " for '" + item.id +
                    "' needs sample paths; run predict with --emit-samples");
  }
  const auto& q = stored_quantile(item, level);
  if (span.lead >= q.size()) {
    throw DomainError("span " + format_span(span) + " is outside the forecast horizon");
  }
  return q[span.lead];
}

}  // namespace

MetricReport evaluate(std::span<const EvalItem> items, const EvalSpec& spec) {
  if (items.empty()) {
    throw DomainError("nothing to evaluate");
  }
  MetricReport report;
  report.items = items.size();
  std::size_t horizon = items.front().truth.size();
  for (const auto& item : items) {
    horizon = std::min(horizon, item.truth.size());
  }

  for (const auto& span : spec.spans) {
    for (double level : spec.levels) {
      std::vector<double> z;
      std::vector<double> zhat;
      for (const auto& item : items) {
        z.push_back(truth_sum(item.truth, span));
        zhat.push_back(item_quantile(item, span, level));
      }
      report.risks.push_back({span, level, rho_risk(z, zhat, level)});
    }
  }
  for (double level : spec.levels) {
    double sum = 0.0;
    for (std::size_t lead = 0; lead < horizon; ++lead) {
      std::vector<double> z;
      std::vector<double> zhat;
      for (const auto& item : items) {
        z.push_back(item.truth[lead]);
        zhat.push_back(item_quantile(item, Span{lead, 1}, level));
      }
      sum += rho_risk(z, zhat, level);
    }
    report.all_k.push_back({Span{0, horizon}, level, sum / static_cast<double>(horizon)});
  }

  std::vector<std::vector<double>> truths;
  std::vector<std::vector<double>> medians;
  for (const auto& item : items) {
    truths.push_back(item.truth);
    std::vector<double> m(item.truth.size());
    for (std::size_t h = 0; h < m.size(); ++h) {
      m[h] = item_quantile(item, Span{h, 1}, 0.5);
    }
    medians.push_back(std::move(m));
  }
  const NdRmse err = nd_rmse(truths, medians);
  report.nd = err.nd;
  report.rmse = err.rmse;

  if (spec.coverage) {
    std::vector<Matrix> paths;
    for (const auto& item : items) {
      if (item.paths.empty()) {
        throw DataError("coverage needs sample paths but '" + item.id +
                        "' has none; run predict with --emit-samples");
      }
      paths.push_back(item.paths);
    }
    for (const auto& span : spec.spans) {
      report.coverage.push_back(
          {span, spec.coverage_levels, coverage(truths, paths, spec.coverage_levels, span)});
    }
  }
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["items"] = items;
  j["nd"] = nd;
  j["rmse"] = rmse;
  auto risks_json = nlohmann::ordered_json::array();
  for (const auto& r : risks) {
    risks_json.push_back({{"lead", r.span.lead},
                          {"length", r.span.length},
                          {"rho", r.level},
                          {"risk", r.risk}});
  }
  j["rho_risk"] = std::move(risks_json);
  auto all_json = nlohmann::ordered_json::array();
  for (const auto& r : all_k) {
    all_json.push_back({{"k", r.span.length}, {"rho", r.level}, {"risk", r.risk}});
  }
  j["all_k"] = std::move(all_json);
  auto cov_json = nlohmann::ordered_json::array();
  for (const auto& c : coverage) {
    cov_json.push_back({{"lead", c.span.lead},
                        {"length", c.span.length},
                        {"levels", c.levels},
                        {"coverage", c.values}});
  }
  j["coverage"] = std::move(cov_json);
  return j.dump(2);
}

void MetricReport::write_table(std::ostream& out) const {
  const auto flags = out.flags();
  out << "items: " << items << '\n';
  out << std::fixed << std::setprecision(4);
  out << "ND:    " << nd << '\n';
  out << "RMSE:  " << rmse << '\n';
  out << "span      rho    risk\n";
  for (const auto& r : risks) {
    out << std::left << std::setw(10) << format_span(r.span) << std::setw(7) << r.level
        << r.risk << '\n';
  }
  for (const auto& r : all_k) {
    out << std::left << std::setw(10) << ("all(" + std::to_string(r.span.length) + ")")
        << std::setw(7) << r.level << r.risk << '\n';
  }
  for (const auto& c : coverage) {
    out << "coverage " << format_span(c.span) << ":";
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      out << ' ' << c.levels[l] << "->" << c.values[l];
    }
    out << '\n';
  }
  out.flags(flags);
}

void MetricReport::write_coverage_tsv(std::ostream& out) const {
  out << "span\tp\tcoverage\n";
  for (const auto& c : coverage) {
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      out << format_span(c.span) << '\t' << c.levels[l] << '\t' << c.values[l] << '\n';
    }
  }
}

long rolling_start(std::size_t series_length, const RollingSpec& spec, std::size_t horizon,
                   std::size_t k) {
  return static_cast<long>(series_length) - static_cast<long>(horizon) -
         static_cast<long>((spec.windows - 1 - k) * spec.stride);
}

BacktestReport rolling_backtest(const Panel& panel, const ModelParams& model,
                                const RollingSpec& spec) {
  if (spec.windows < 1 || spec.stride < 1) {
    throw ConfigError("rolling backtest needs at least one window and a positive stride");
  }
  const std::size_t horizon =
      spec.horizon == 0 ? model.arch.window.prediction_length : spec.horizon;
  std::string shortfall;
  for (const auto& s : panel) {
    const long first = rolling_start(s.length(), spec, horizon, 0);
    if (first < 1) {
      shortfall += " '" + s.id + "' needs " + std::to_string(1 - first) + " more steps;";
    }
  }
  if (!shortfall.empty()) {
    throw DataError("insufficient data for the rolling backtest:" + shortfall);
  }

  BacktestReport report;
  std::vector<EvalItem> pooled;
  for (std::size_t k = 0; k < spec.windows; ++k) {
    std::vector<EvalItem> items;
    for (const auto& s : panel) {
      const long start = rolling_start(s.length(), spec, horizon, k);
      ForecastOptions options{spec.num_samples, horizon, spec.seed, spec.workers};
      const ForecastSamples samples = forecast(s, model, options, start);
      EvalItem item;
      item.id = s.id;
      item.paths = samples.paths;
      for (std::size_t h = 0; h < horizon; ++h) {
        const auto& v = s.target[static_cast<std::size_t>(start) + h];
        if (!v) {
          throw DataError("series '" + s.id + "' has a missing value inside backtest window " +
                          std::to_string(k));
        }
        item.truth.push_back(*v);
      }
      items.push_back(std::move(item));
    }
    report.windows.push_back(evaluate(items, spec.eval));
    pooled.insert(pooled.end(), items.begin(), items.end());
    report.items.push_back(std::move(items));
  }
  report.pooled = evaluate(pooled, spec.eval);
  return report;
}

}  // namespace deepar
