#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/nn.hpp"
#include "rae/optimizer.hpp"
#include "rae/random.hpp"

namespace rae {

struct MlpParams {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t hidden = 0;  // 0: same as the input width
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  bool operator==(const MlpParams&) const = default;
};

struct KnnParams {
  std::size_t k = 5;
  bool operator==(const KnnParams&) const = default;
};

struct TreeParams {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 2;
  bool operator==(const TreeParams&) const = default;
};

struct LdaParams {
  // Ridge added to the pooled covariance diagonal, relative to trace / D.
  double shrinkage = 1e-3;
  bool operator==(const LdaParams&) const = default;
};

struct LogRegParams {
  double l2 = 1e-4;
  std::size_t iterations = 500;
  double step = 0.1;
  bool operator==(const LogRegParams&) const = default;
};

using ClassifierKind = std::variant<MlpParams, KnnParams, TreeParams, LdaParams, LogRegParams>;

inline std::string_view kind_tag(const ClassifierKind& k) {
  static constexpr std::string_view tags[] = {"mlp", "knn", "tree", "lda", "logreg"};
  return tags[k.index()];
}

/// Default hyperparameters for a tag.
inline ClassifierKind parse_classifier_kind(std::string_view tag) {
  if (tag == "mlp") return MlpParams{};
  if (tag == "knn") return KnnParams{};
  if (tag == "tree") return TreeParams{};
  if (tag == "lda") return LdaParams{};
  if (tag == "logreg") return LogRegParams{};
  throw ConfigError("unknown classifier kind '" + std::string(tag) + "'");
}

inline void validate(const ClassifierKind& kind) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, MlpParams>) {
          if (p.epochs == 0 || p.batch_size == 0) throw ConfigError("mlp epochs and batch size must be positive");
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          if (p.k == 0) throw ConfigError("knn k must be positive");
        } else if constexpr (std::is_same_v<P, TreeParams>) {
          if (p.max_depth == 0 || p.min_leaf == 0) throw ConfigError("tree depth and leaf size must be positive");
        } else if constexpr (std::is_same_v<P, LdaParams>) {
          if (!(p.shrinkage >= 0.0)) throw ConfigError("lda shrinkage must be non-negative");
        } else {
          if (!(p.l2 >= 0.0) || p.iterations == 0 || !(p.step > 0.0)) {
            throw ConfigError("logreg needs l2 >= 0, iterations > 0, step > 0");
          }
        }
      },
      kind);
}

// Stored models -------------------------------------------------------------------------------

struct MlpModel {
  Sequential network;
};

struct KnnModel {
  std::size_t k = 5;
  Matrix points;
  std::vector<int> labels;
  std::size_t classes = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t depth = 0;
};

struct LdaModel {
  Matrix coefficients;  // L x D, Sigma^-1 mu_c
  std::vector<double> offsets;  // -mu_c' Sigma^-1 mu_c / 2 + log prior; -inf for absent classes
};

struct LogRegModel {
  std::vector<double> mean;
  std::vector<double> scale;
  Matrix weights;  // L x D, on standardized inputs
  std::vector<double> bias;
  std::vector<double> loss_history;  // objective before each iteration, then the final value
};

class FittedClassifier {
 public:
  using State = std::variant<MlpModel, KnnModel, TreeModel, LdaModel, LogRegModel>;

  FittedClassifier(State state, std::size_t dim, std::size_t classes)
      : state_(std::move(state)), dim_(dim), classes_(classes) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t classes() const noexcept { return classes_; }
  const State& state() const noexcept { return state_; }

  std::vector<int> predict(const Matrix& latents) const;

 private:
  State state_;
  std::size_t dim_;
  std::size_t classes_;
};

namespace detail {

inline std::size_t infer_classes(std::span<const int> labels, std::optional<std::size_t> classes) {
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw ArgumentError("negative class label");
    max_label = std::max(max_label, y);
  }
  const std::size_t n = classes.value_or(static_cast<std::size_t>(max_label + 1));
  if (max_label >= static_cast<int>(n)) {
    throw ArgumentError("label " + std::to_string(max_label) + " outside " + std::to_string(n) + " classes");
  }
  return n;
}

inline int majority(std::span<const std::size_t> counts) {
  // max_element returns the first maximum: ties go to the smallest label.
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

inline double gini(std::span<const std::size_t> counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

// Tree ---------------------------------------------------------------------------------------

struct TreeBuilder {
  const Matrix& x;
  std::span<const int> y;
  std::size_t classes;
  TreeParams params;
  TreeModel model;

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    std::vector<std::size_t> counts(classes, 0);
    for (auto i : idx) ++counts[static_cast<std::size_t>(y[i])];
    const int node_id = static_cast<int>(model.nodes.size());
    model.nodes.push_back(TreeNode{-1, 0.0, -1, -1, majority(counts)});
    model.depth = std::max(model.depth, depth);

    const std::size_t n = idx.size();
    const double parent = gini(counts, n);
    if (parent == 0.0 || depth >= params.max_depth || n < 2 * params.min_leaf) return node_id;

    // Best split: lowest weighted child impurity; zero-gain splits are allowed so that
    // patterns like XOR, invisible to any single split, can be resolved one level down.
    double best = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    std::vector<std::size_t> left(classes), right(classes);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(a, f) < x(b, f) || (x(a, f) == x(b, f) && a < b);
      });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(y[order[i]]);
        ++left[c];
        --right[c];
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        const double a = x(order[i], f);
        const double b = x(order[i + 1], f);
        if (!(a < b) || nl < params.min_leaf || nr < params.min_leaf) continue;
        const double w = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                         static_cast<double>(n);
        if (w < best) {
          best = w;
          best_feature = static_cast<int>(f);
          best_threshold = a + (b - a) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> li, ri;
    for (auto i : idx) {
      (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? li : ri).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = build(std::move(li), depth + 1);
    const int r = build(std::move(ri), depth + 1);
    auto& node = model.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }
};

inline int tree_route(const TreeModel& m, std::span<const double> q) {
  std::size_t id = 0;
  while (m.nodes[id].feature >= 0) {
    const auto& n = m.nodes[id];
    id = static_cast<std::size_t>(q[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return m.nodes[id].label;
}

// Logistic regression ------------------------------------------------------------------------

inline Matrix standardize(const Matrix& x, std::span<const double> mean, std::span<const double> scale) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
  }
  return out;
}

inline Matrix affine_logits(const Matrix& x, const Matrix& w, std::span<const double> b) {
  Matrix logits = matmul_nt(x, w);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  return logits;
}

inline double logreg_objective(const Matrix& xs, std::span<const int> y, const Matrix& w,
                               std::span<const double> b, double l2, Matrix* grad_logits) {
  LossResult ce = softmax_cross_entropy(affine_logits(xs, w, b), y);
  double penalty = 0.0;
  for (double v : w.values()) penalty += v * v;
  if (grad_logits) *grad_logits = std::move(ce.grad);
  return ce.loss + 0.5 * l2 * penalty;
}

// Multilayer perceptron ----------------------------------------------------------------------

inline MlpModel fit_mlp_from(Sequential network, const Matrix& x, std::span<const int> y,
                             const MlpParams& p) {
  Optimizer opt(p.optimizer);
  Rng rng(derive_seed(p.seed, {stream::kShuffle}));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ParamSlot> slots;
  network.collect_params("classifier", slots);
  std::vector<int> yb;
  for (std::size_t e = 0; e < p.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += p.batch_size) {
      const std::size_t end = std::min(order.size(), start + p.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      yb.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y[idx[i]];
      network.zero_grad();
      const LossResult ce = softmax_cross_entropy(network.forward(gather_rows(x, idx)), yb);
      network.backward(ce.grad);
      opt.step(slots);
    }
  }
  network.clear_cache();
  network.zero_grad();
  return MlpModel{std::move(network)};
}

}  // namespace detail

/// Trains an MLP classifier starting from `initial` (e.g. the gamma network of a bundle).
inline FittedClassifier fit_mlp(Sequential initial, const Matrix& latents, std::span<const int> labels,
                                const MlpParams& params, std::optional<std::size_t> classes = std::nullopt) {
  if (latents.rows() == 0) throw ArgumentError("cannot fit a classifier on zero samples");
  if (latents.rows() != labels.size()) throw DimensionError("one label per latent row");
  validate(ClassifierKind{params});
  const std::size_t n_classes = detail::infer_classes(labels, classes.value_or(initial.out_dim()));
  if (initial.in_dim() != latents.cols() || initial.out_dim() != n_classes) {
    throw DimensionError("mlp network shape does not match latents/classes");
  }
  return FittedClassifier(detail::fit_mlp_from(std::move(initial), latents, labels, params),
                          latents.cols(), n_classes);
}

/// Fits one classifier. `classes` defaults to max label + 1.
inline FittedClassifier fit(const ClassifierKind& kind, const Matrix& latents, std::span<const int> labels,
                            std::optional<std::size_t> classes = std::nullopt) {
  if (latents.rows() == 0) throw ArgumentError("cannot fit a classifier on zero samples");
  if (latents.rows() != labels.size()) throw DimensionError("one label per latent row");
  validate(kind);
  const std::size_t n_classes = detail::infer_classes(labels, classes);
  const std::size_t n = latents.rows();
  const std::size_t dim = latents.cols();

  if (const auto* p = std::get_if<MlpParams>(&kind)) {
    Rng rng(derive_seed(p->seed, {stream::kClassifier}));
    const std::size_t hidden = p->hidden == 0 ? dim : p->hidden;
    return fit_mlp(make_two_layer(dim, hidden, n_classes, rng), latents, labels, *p, n_classes);
  }
  if (const auto* p = std::get_if<KnnParams>(&kind)) {
    return FittedClassifier(KnnModel{p->k, latents, std::vector<int>(labels.begin(), labels.end()), n_classes},
                            dim, n_classes);
  }
  if (const auto* p = std::get_if<TreeParams>(&kind)) {
    detail::TreeBuilder builder{latents, labels, n_classes, *p, {}};
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    builder.build(std::move(idx), 0);
    return FittedClassifier(std::move(builder.model), dim, n_classes);
  }
  if (const auto* p = std::get_if<LdaParams>(&kind)) {
    using EMat = Eigen::MatrixXd;
    std::vector<std::size_t> counts(n_classes, 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    const auto present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
    if (present < 2) throw ArgumentError("lda needs at least two classes present");
    EMat means = EMat::Zero(static_cast<Eigen::Index>(n_classes), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j) means(labels[i], static_cast<Eigen::Index>(j)) += latents(i, j);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (counts[c] > 0) means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    }
    EMat cov = EMat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd d(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        d(static_cast<Eigen::Index>(j)) = latents(i, j) - means(labels[i], static_cast<Eigen::Index>(j));
      }
      cov.noalias() += d * d.transpose();
    }
    const auto dof = static_cast<double>(n > static_cast<std::size_t>(present) ? n - static_cast<std::size_t>(present) : n);
    cov /= dof;
    const double ridge = p->shrinkage * cov.trace() / static_cast<double>(dim);
    cov.diagonal().array() += ridge;
    Eigen::LLT<EMat> llt(cov);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
      throw NumericError("lda: pooled covariance is singular after shrinkage");
    }
    const EMat coef = llt.solve(means.transpose());  // D x L
    LdaModel m;
    m.coefficients = Matrix(n_classes, dim);
    m.offsets.assign(n_classes, -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (counts[c] == 0) continue;
      const auto ci = static_cast<Eigen::Index>(c);
      for (std::size_t j = 0; j < dim; ++j) m.coefficients(c, j) = coef(static_cast<Eigen::Index>(j), ci);
      m.offsets[c] = -0.5 * means.row(ci).dot(coef.col(ci)) +
                     std::log(static_cast<double>(counts[c]) / static_cast<double>(n));
    }
    if (!all_finite(m.coefficients.values())) throw NumericError("lda: non-finite discriminant coefficients");
    return FittedClassifier(std::move(m), dim, n_classes);
  }
  const auto& p = std::get<LogRegParams>(kind);
  LogRegModel m;
  m.mean.assign(dim, 0.0);
  m.scale.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) m.mean[j] += latents(i, j);
  }
  for (auto& v : m.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = latents(i, j) - m.mean[j];
      m.scale[j] += d * d;
    }
  }
  for (auto& v : m.scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 0.0)) v = 1.0;
  }
  const Matrix xs = detail::standardize(latents, m.mean, m.scale);
  m.weights = Matrix(n_classes, dim);
  m.bias.assign(n_classes, 0.0);
  Matrix g;
  for (std::size_t it = 0; it < p.iterations; ++it) {
    m.loss_history.push_back(detail::logreg_objective(xs, labels, m.weights, m.bias, p.l2, &g));
    const Matrix gw = matmul_tn(g, xs);
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t j = 0; j < dim; ++j) m.weights(c, j) -= p.step * (gw(c, j) + p.l2 * m.weights(c, j));
    }
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t c = 0; c < n_classes; ++c) m.bias[c] -= p.step * g(i, c);
    }
  }
  m.loss_history.push_back(detail::logreg_objective(xs, labels, m.weights, m.bias, p.l2, nullptr));
  return FittedClassifier(std::move(m), dim, n_classes);
}

inline std::vector<int> FittedClassifier::predict(const Matrix& latents) const {
  if (latents.cols() != dim_) {
    throw ArgumentError("classifier fitted on " + std::to_string(dim_) + " features, query has " +
                        std::to_string(latents.cols()));
  }
  const std::size_t n = latents.rows();
  if (const auto* m = std::get_if<MlpModel>(&state_)) return argmax_rows(m->network.infer(latents));
  if (const auto* m = std::get_if<KnnModel>(&state_)) {
    std::vector<int> out(n);
    const std::size_t k = std::min(m->k, m->points.rows());
    std::vector<std::pair<double, std::size_t>> dist(m->points.rows());
    std::vector<std::size_t> votes(classes_);
    for (std::size_t q = 0; q < n; ++q) {
      const auto qr = latents.row(q);
      for (std::size_t i = 0; i < m->points.rows(); ++i) {
        const auto pr = m->points.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
          const double d = qr[j] - pr[j];
          s += d * d;
        }
        dist[i] = {s, i};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(m->labels[dist[i].second])];
      out[q] = detail::majority(votes);
    }
    return out;
  }
  if (const auto* m = std::get_if<TreeModel>(&state_)) {
    std::vector<int> out(n);
    for (std::size_t q = 0; q < n; ++q) out[q] = detail::tree_route(*m, latents.row(q));
    return out;
  }
  if (const auto* m = std::get_if<LdaModel>(&state_)) {
    Matrix scores = matmul_nt(latents, m->coefficients);
    for (std::size_t q = 0; q < n; ++q) {
      auto r = scores.row(q);
      for (std::size_t c = 0; c < classes_; ++c) r[c] += m->offsets[c];
    }
    return argmax_rows(scores);
  }
  const auto& m = std::get<LogRegModel>(state_);
  return argmax_rows(detail::affine_logits(detail::standardize(latents, m.mean, m.scale), m.weights, m.bias));
}

}  // namespace rae
