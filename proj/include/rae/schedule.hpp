#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/random.hpp"

namespace rae {

enum class ScheduleKind { none, hard, soft };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::none: return "none";
    case ScheduleKind::hard: return "hard";
    case ScheduleKind::soft: return "soft";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "none") return ScheduleKind::none;
  if (s == "hard") return ScheduleKind::hard;
  if (s == "soft") return ScheduleKind::soft;
  throw ConfigError("unknown schedule kind '" + std::string(s) + "'");
}

enum class Head { adversary, nuisance };

inline std::string_view to_string(Head h) { return h == Head::adversary ? "adversary" : "nuisance"; }

/// Per-node drop probabilities for the adversary and nuisance views of the latent code.
/// Nodes are 0-based here; node d in [0, D) corresponds to the 1-based node d + 1.
struct DropoutSchedule {
  ScheduleKind kind = ScheduleKind::soft;
  std::size_t dim = 0;
  double alpha = 0.0;            // soft only
  std::size_t split_index = 0;   // hard only: |z_a|
  std::vector<double> drop_adversary;
  std::vector<double> drop_nuisance;

  const std::vector<double>& drop(Head h) const {
    return h == Head::adversary ? drop_adversary : drop_nuisance;
  }

  bool operator==(const DropoutSchedule&) const = default;
};

/// p_a(d) = ((d - 1) / (D - 1))^alpha, p_n = 1 - p_a.
inline DropoutSchedule make_soft_schedule(std::size_t dim, double alpha) {
  if (dim < 2) throw ArgumentError("soft schedule needs D >= 2, got " + std::to_string(dim));
  if (!(alpha > 0.0)) throw ArgumentError("soft schedule needs alpha > 0");
  DropoutSchedule s;
  s.kind = ScheduleKind::soft;
  s.dim = dim;
  s.alpha = alpha;
  s.drop_adversary.resize(dim);
  s.drop_nuisance.resize(dim);
  const double denom = static_cast<double>(dim - 1);
  for (std::size_t d = 0; d < dim; ++d) {
    const double pa = std::pow(static_cast<double>(d) / denom, alpha);
    s.drop_adversary[d] = pa;
    s.drop_nuisance[d] = 1.0 - pa;
  }
  return s;
}

/// Step schedule: the first round(D * a / (a + n)) nodes (half rounds up) feed the adversary,
/// the rest feed the nuisance head.
inline DropoutSchedule make_hard_schedule(std::size_t dim, std::size_t ratio_adversary,
                                          std::size_t ratio_nuisance) {
  if (dim < 2) throw ArgumentError("hard schedule needs D >= 2, got " + std::to_string(dim));
  if (ratio_adversary == 0 || ratio_nuisance == 0) {
    throw ArgumentError("hard schedule ratio components must be positive");
  }
  // Integer round-half-up of D * a / (a + n).
  const std::size_t total = ratio_adversary + ratio_nuisance;
  const std::size_t split = (2 * dim * ratio_adversary + total) / (2 * total);
  if (split == 0 || split == dim) {
    throw ArgumentError("hard schedule split " + std::to_string(split) + " of " +
                        std::to_string(dim) + " is degenerate");
  }
  DropoutSchedule s;
  s.kind = ScheduleKind::hard;
  s.dim = dim;
  s.split_index = split;
  s.drop_adversary.resize(dim);
  s.drop_nuisance.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    s.drop_adversary[d] = d < split ? 0.0 : 1.0;
    s.drop_nuisance[d] = 1.0 - s.drop_adversary[d];
  }
  return s;
}

/// Expected number of kept nodes, sum_d (1 - p(d)).
inline double effective_dim(const DropoutSchedule& s, Head head) {
  double sum = 0.0;
  for (double p : s.drop(head)) sum += 1.0 - p;
  return sum;
}

/// Keep probabilities 1 - p(d); scales z for deterministic evaluation of a head.
inline std::vector<double> expectation_mask(const DropoutSchedule& s, Head head) {
  std::vector<double> out;
  out.reserve(s.dim);
  for (double p : s.drop(head)) out.push_back(1.0 - p);
  return out;
}

struct MaskSample {
  std::vector<double> adversary;  // 0/1 per node
  std::vector<double> nuisance;
};

namespace detail {
inline double keep_draw(double drop, std::uniform_real_distribution<double>& u, Rng& rng) {
  // Certain outcomes consume no randomness, so hard schedules are rng-free.
  if (drop <= 0.0) return 1.0;
  if (drop >= 1.0) return 0.0;
  return u(rng) >= drop ? 1.0 : 0.0;
}
}  // namespace detail

/// Independent keep decisions for every node of both views.
inline MaskSample sample_mask(const DropoutSchedule& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MaskSample m;
  m.adversary.resize(s.dim);
  m.nuisance.resize(s.dim);
  for (std::size_t d = 0; d < s.dim; ++d) m.adversary[d] = detail::keep_draw(s.drop_adversary[d], u, rng);
  for (std::size_t d = 0; d < s.dim; ++d) m.nuisance[d] = detail::keep_draw(s.drop_nuisance[d], u, rng);
  return m;
}

/// One fresh mask per row, for a batch of `rows` samples.
struct MaskBatch {
  Matrix adversary;
  Matrix nuisance;

  const Matrix& view(Head h) const { return h == Head::adversary ? adversary : nuisance; }
};

inline MaskBatch sample_masks(const DropoutSchedule& s, std::size_t rows, Rng& rng) {
  MaskBatch b{Matrix(rows, s.dim), Matrix(rows, s.dim)};
  for (std::size_t i = 0; i < rows; ++i) {
    MaskSample m = sample_mask(s, rng);
    std::copy(m.adversary.begin(), m.adversary.end(), b.adversary.row(i).begin());
    std::copy(m.nuisance.begin(), m.nuisance.end(), b.nuisance.row(i).begin());
  }
  return b;
}

}  // namespace rae
