#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rae/nn.hpp"

namespace rae {

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-5;
  double step = 1e-4;
  // Denominator floor, so gradients that are zero up to rounding compare absolutely.
  double floor = 1e-6;
};

inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a) + std::abs(b), floor});
}

/// Compares the gradients found in `params` (filled by `loss_and_grad`) against central finite
/// differences of `loss`. Both callbacks must evaluate the same deterministic function of the
/// parameter values.
inline GradCheckReport grad_check(std::span<const ParamSlot> params,
                                  const std::function<double()>& loss_and_grad,
                                  const std::function<double()>& loss,
                                  GradCheckOptions options = {}) {
  loss_and_grad();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      const auto at = [&](double offset) {
        p.value[i] = saved + offset;
        return loss();
      };
      const double h = options.step;
      // Fourth-order central stencil.
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
      p.value[i] = saved;
      const double err = relative_error(analytic[k][i], numeric, options.floor);
      report.entries.push_back({p.name, i, analytic[k][i], numeric, err});
      report.max_relative_error = std::max(report.max_relative_error, err);
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace rae
