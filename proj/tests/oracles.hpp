#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "rae/classifiers.hpp"
#include "rae/harness.hpp"
#include "rae/random.hpp"

namespace oracle {

inline rae::Matrix normal_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  rae::Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  rae::Matrix m(n, d);
  for (double& v : m.values()) v = unit(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, int classes, std::uint64_t seed) {
  rae::Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::vector<int> y(n);
  for (int& v : y) v = pick(rng);
  return y;
}

/// All-pairs distances, full stable sort, then a vote with ties to the smallest label.
inline std::vector<int> brute_force_knn(const rae::Matrix& train, std::span<const int> labels, const rae::Matrix& query,
                                        std::size_t k, int classes) {
  std::vector<int> out;
  for (std::size_t q = 0; q < query.rows(); ++q) {
    std::vector<double> dist(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < train.cols(); ++j) s += (query(q, j) - train(i, j)) * (query(q, j) - train(i, j));
      dist[i] = s;
    }
    std::vector<std::size_t> order(train.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(labels[order[i]])];
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    }
    out.push_back(best);
  }
  return out;
}

/// 200 random training points, 3 classes, k = 5: fraction of queries where knn agrees.
inline double knn_agreement(std::uint64_t seed) {
  const rae::Matrix train = normal_points(200, 4, seed);
  const std::vector<int> y = random_labels(200, 3, seed + 1);
  const rae::Matrix query = normal_points(200, 4, seed + 2);
  const rae::FittedClassifier f = rae::fit(rae::KnnParams{5}, train, y, 3);
  const std::vector<int> got = f.predict(query);
  const std::vector<int> want = brute_force_knn(train, y, query, 5, 3);
  std::size_t same = 0;
  for (std::size_t i = 0; i < got.size(); ++i) same += got[i] == want[i];
  return static_cast<double>(same) / static_cast<double>(got.size());
}

inline double accuracy(std::span<const int> a, std::span<const int> b) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

/// XOR corners, each repeated so min_leaf = 2 can be met.
struct Labeled {
  rae::Matrix x;
  std::vector<int> y;
};

inline Labeled xor_corners() {
  Labeled d{rae::Matrix(8, 2), {}};
  const double corners[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (std::size_t i = 0; i < 8; ++i) {
    d.x(i, 0) = corners[i % 4][0];
    d.x(i, 1) = corners[i % 4][1];
    d.y.push_back(static_cast<int>(corners[i % 4][0]) ^ static_cast<int>(corners[i % 4][1]));
  }
  return d;
}

inline double tree_xor_accuracy() {
  const Labeled d = xor_corners();
  const rae::FittedClassifier f = rae::fit(rae::TreeParams{2, 2}, d.x, d.y);
  return accuracy(f.predict(d.x), d.y);
}

/// Two unit-variance Gaussian clusters centred at +-(5, 0, ..., 0).
inline Labeled separable_clusters(std::size_t n, std::size_t d, std::uint64_t seed) {
  Labeled out{normal_points(n, d, seed), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    out.x(i, 0) += y == 0 ? -5.0 : 5.0;
    out.y.push_back(y);
  }
  return out;
}

inline double separable_accuracy(const rae::ClassifierKind& kind, std::uint64_t seed) {
  const Labeled d = separable_clusters(400, 5, seed);
  return accuracy(rae::fit(kind, d.x, d.y).predict(d.x), d.y);
}

/// Two independent fits on the same data predict identically, and predict is repeatable.
inline bool deterministic(const rae::ClassifierKind& kind, std::uint64_t seed) {
  const rae::Matrix x = normal_points(120, 3, seed);
  const std::vector<int> y = random_labels(120, 3, seed + 1);
  const rae::Matrix q = normal_points(60, 3, seed + 2);
  const rae::FittedClassifier a = rae::fit(kind, x, y, 3);
  const rae::FittedClassifier b = rae::fit(kind, x, y, 3);
  return a.predict(q) == b.predict(q) && a.predict(q) == a.predict(q);
}

/// Reference MLP parameter-optimization rows (D-cRAE stage, then DA-cRAE stage), as
/// fractions: lambda_A, lambda_N, classifier, adversary, nuisance.
inline std::vector<rae::SweepCell> reference_sweep() {
  const double rows[][5] = {
      {0, 0.005, 0.748, 0.077, 0.085}, {0, 0.01, 0.735, 0.125, 0.152}, {0, 0.05, 0.772, 0.107, 0.197},
      {0, 0.2, 0.756, 0.136, 0.165},   {0, 0.5, 0.741, 0.126, 0.355},  {0.01, 0.05, 0.783, 0.094, 0.136},
      {0.05, 0.05, 0.773, 0.067, 0.146}, {0.1, 0.05, 0.779, 0.059, 0.133}, {0.2, 0.05, 0.815, 0.055, 0.127},
      {0.5, 0.05, 0.838, 0.049, 0.139}};
  std::vector<rae::SweepCell> cells;
  for (const auto& r : rows) {
    rae::SweepCell c;
    c.lambda_adversary = r[0];
    c.lambda_nuisance = r[1];
    c.stage = r[0] == 0.0 ? 1 : 2;
    c.task_accuracy = r[2];
    c.test_accuracy = r[2];
    c.adversary_accuracy = r[3];
    c.nuisance_accuracy = r[4];
    cells.push_back(c);
  }
  return cells;
}

}  // namespace oracle
