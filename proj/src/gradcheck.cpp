#include "deepar/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "deepar/error.hpp"

namespace deepar {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<const ParamBlock> params,
                                  std::span<const Matrix> analytic, double tolerance,
                                  double step, FiniteDiffScheme scheme) {
  if (params.size() != analytic.size()) {
    throw ConfigError("finite_diff_check: one analytic gradient per parameter block required");
  }
  const double base = loss();
  if (loss() != base) {
    throw ConfigError("finite_diff_check: loss is not deterministic; check is invalid");
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& value = *params[b].value;
    if (!value.same_shape(analytic[b])) {
      throw ConfigError("finite_diff_check: gradient shape mismatch for " + params[b].name);
    }
    BlockCheck check{params[b].name};
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      const auto at = [&](double offset) {
        value[i] = saved + offset;
        return loss();
      };
      double numeric = 0.0;
      if (scheme == FiniteDiffScheme::Central) {
        numeric = (at(step) - at(-step)) / (2.0 * step);
      } else {
        const double d1 = at(step) - at(-step);
        const double d2 = at(2.0 * step) - at(-2.0 * step);
        numeric = (8.0 * d1 - d2) / (12.0 * step);
      }
      value[i] = saved;
      const double err = relative_error(analytic[b][i], numeric);
      if (err > check.max_relative_error || i == 0) {
        check.max_relative_error = std::max(err, check.max_relative_error);
        check.worst_index = i;
        check.analytic = analytic[b][i];
        check.numeric = numeric;
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.blocks.push_back(std::move(check));
  }
  return report;
}

}  // namespace deepar
