#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rae/errors.hpp"
#include "rae/nn.hpp"

namespace rae {

enum class OptimizerKind { plain_sgd, adaptive_moment };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::plain_sgd ? "sgd" : "adam";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::plain_sgd;
  if (s == "adam") return OptimizerKind::adaptive_moment;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adaptive_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerSettings&) const = default;
};

/// Per-player optimizer. Moment buffers are created on the first step and must keep matching
/// the parameter list passed afterwards.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {
    if (!(settings_.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  }

  const OptimizerSettings& settings() const noexcept { return settings_; }
  std::size_t steps() const noexcept { return steps_; }

  void step(std::span<const ParamSlot> params) {
    for (const auto& p : params) {
      if (p.grad.size() != p.value.size()) {
        throw DimensionError("optimizer: gradient of '" + p.name + "' has wrong length");
      }
      if (!all_finite(p.grad)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
    if (settings_.kind == OptimizerKind::plain_sgd) {
      for (const auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= settings_.learning_rate * p.grad[i];
      }
      ++steps_;
      return;
    }
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.value.size(), 0.0);
        second_.emplace_back(p.value.size(), 0.0);
      }
    }
    if (first_.size() != params.size()) throw StateError("optimizer: parameter list changed between steps");
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(settings_.beta1, t);
    const double c2 = 1.0 - std::pow(settings_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& p = params[k];
      auto& m = first_[k];
      auto& v = second_[k];
      if (m.size() != p.value.size()) throw StateError("optimizer: shape of '" + p.name + "' changed");
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = p.grad[i];
        m[i] = settings_.beta1 * m[i] + (1.0 - settings_.beta1) * g;
        v[i] = settings_.beta2 * v[i] + (1.0 - settings_.beta2) * g * g;
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        p.value[i] -= settings_.learning_rate * mh / (std::sqrt(vh) + settings_.epsilon);
      }
    }
  }

 private:
  OptimizerSettings settings_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

}  // namespace rae
