#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/random.hpp"

namespace rae {

enum class Activation { identity, rectifier };

/// Mutable view of one named parameter tensor and its gradient buffer.
struct ParamSlot {
  std::string name;
  std::span<double> value;
  std::span<const double> grad;
};

struct DenseGrads {
  Matrix weights;
  std::vector<double> bias;
};

struct DenseBackward {
  DenseGrads params;
  Matrix input;
};

/// Fully connected layer y = act(x W^T + b) with W stored out x in.
class DenseLayer {
 public:
  DenseLayer() = default;

  DenseLayer(Matrix weights, std::vector<double> bias, Activation activation)
      : weights_(std::move(weights)), bias_(std::move(bias)), activation_(activation) {
    if (bias_.size() != weights_.rows()) {
      throw DimensionError("dense layer bias length " + std::to_string(bias_.size()) +
                           " vs " + std::to_string(weights_.rows()) + " outputs");
    }
  }

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(out, in);
    for (double& v : w.values()) v = dist(rng);
    return DenseLayer(std::move(w), std::vector<double>(out, 0.0), activation);
  }

  std::size_t in_dim() const noexcept { return weights_.cols(); }
  std::size_t out_dim() const noexcept { return weights_.rows(); }
  Activation activation() const noexcept { return activation_; }

  const Matrix& weights() const noexcept { return weights_; }
  Matrix& weights() noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }
  std::vector<double>& bias() noexcept { return bias_; }

  /// Forward pass that records the input and pre-activation for backward().
  Matrix forward(const Matrix& input) {
    Matrix pre = affine(input);
    Matrix out = activate(pre);
    cache_ = Cache{input, std::move(pre)};
    return out;
  }

  /// Forward pass without touching the cache.
  Matrix infer(const Matrix& input) const { return activate(affine(input)); }

  bool has_cache() const noexcept { return cache_.has_value(); }
  void clear_cache() noexcept { cache_.reset(); }

  DenseBackward backward(const Matrix& upstream) const {
    if (!cache_) throw StateError("dense backward called without a cached forward pass");
    const Matrix& pre = cache_->pre_activation;
    require_same_shape(upstream, pre, "dense backward upstream");
    Matrix delta = upstream;
    if (activation_ == Activation::rectifier) {
      auto d = delta.values();
      const auto p = pre.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (p[i] <= 0.0) d[i] = 0.0;
      }
    }
    DenseBackward out;
    out.params.weights = matmul_tn(delta, cache_->input);
    out.params.bias.assign(out_dim(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto r = delta.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) out.params.bias[j] += r[j];
    }
    out.input = matmul(delta, weights_);
    return out;
  }

 private:
  struct Cache {
    Matrix input;
    Matrix pre_activation;
  };

  Matrix affine(const Matrix& input) const {
    if (input.cols() != in_dim()) {
      throw DimensionError("dense layer expects " + std::to_string(in_dim()) +
                           " input columns, got " + std::to_string(input.cols()));
    }
    Matrix pre = matmul_nt(input, weights_);
    for (std::size_t i = 0; i < pre.rows(); ++i) {
      auto r = pre.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias_[j];
    }
    return pre;
  }

  Matrix activate(Matrix pre) const {
    if (activation_ == Activation::rectifier) {
      for (double& v : pre.values()) v = v > 0.0 ? v : 0.0;
    }
    return pre;
  }

  Matrix weights_;
  std::vector<double> bias_;
  Activation activation_ = Activation::identity;
  std::optional<Cache> cache_;
};

/// A stack of dense layers with gradient accumulators.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      if (layers_[i].in_dim() != layers_[i - 1].out_dim()) {
        throw DimensionError("sequential: layer " + std::to_string(i) + " input width mismatch");
      }
    }
    zero_grad();
  }

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::size_t depth() const noexcept { return layers_.size(); }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  const DenseGrads& grad(std::size_t i) const { return grads_.at(i); }

  Matrix forward(const Matrix& input) {
    Matrix x = input;
    for (auto& l : layers_) x = l.forward(x);
    return x;
  }

  Matrix infer(const Matrix& input) const {
    Matrix x = input;
    for (const auto& l : layers_) x = l.infer(x);
    return x;
  }

  /// Back-propagates `upstream`, adds parameter gradients into the accumulators and returns the
  /// gradient with respect to the network input.
  Matrix backward(const Matrix& upstream) {
    Matrix g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      DenseBackward b = layers_[i].backward(g);
      auto gw = grads_[i].weights.values();
      const auto bw = b.params.weights.values();
      for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += bw[k];
      for (std::size_t k = 0; k < grads_[i].bias.size(); ++k) grads_[i].bias[k] += b.params.bias[k];
      g = std::move(b.input);
    }
    return g;
  }

  // Zeroes in place; ParamSlot spans into the accumulators stay valid.
  void zero_grad() {
    if (grads_.size() != layers_.size()) {
      grads_.resize(layers_.size());
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        grads_[i].weights = Matrix(layers_[i].out_dim(), layers_[i].in_dim());
        grads_[i].bias.assign(layers_[i].out_dim(), 0.0);
      }
      return;
    }
    for (auto& g : grads_) {
      g.weights.fill(0.0);
      std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
  }

  void clear_cache() noexcept {
    for (auto& l : layers_) l.clear_cache();
  }

  /// Appends slots named `<prefix>.W<k>` / `<prefix>.b<k>` (k 1-based).
  void collect_params(const std::string& prefix, std::vector<ParamSlot>& out) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string k = std::to_string(i + 1);
      out.push_back({prefix + ".W" + k, layers_[i].weights().values(), grads_[i].weights.values()});
      out.push_back({prefix + ".b" + k, layers_[i].bias(), grads_[i].bias});
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights().size() + l.bias().size();
    return n;
  }

  /// Parameters only; caches and gradients are ignored.
  bool same_parameters(const Sequential& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!(layers_[i].weights() == other.layers_[i].weights()) ||
          layers_[i].bias() != other.layers_[i].bias() ||
          layers_[i].activation() != other.layers_[i].activation()) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
  std::vector<DenseGrads> grads_;
};

/// FC(in, hidden) -> rectifier -> FC(hidden, out).
inline Sequential make_two_layer(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  std::vector<DenseLayer> layers;
  layers.push_back(DenseLayer::glorot(in, hidden, Activation::rectifier, rng));
  layers.push_back(DenseLayer::glorot(hidden, out, Activation::identity, rng));
  return Sequential(std::move(layers));
}

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// Mean over rows of -log softmax(logits)[target]; gradient is (softmax - onehot) / rows.
inline LossResult softmax_cross_entropy(const Matrix& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(logits.rows()) + " rows");
  }
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  LossResult out{0.0, Matrix(n, k)};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= k) {
      throw ArgumentError("softmax_cross_entropy: target " + std::to_string(targets[i]) +
                          " outside [0, " + std::to_string(k) + ")");
    }
    const auto r = logits.row(i);
    double m = r[0];
    for (double v : r) m = std::max(m, v);
    double sum = 0.0;
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = std::exp(r[j] - m);
      sum += g[j];
    }
    const auto t = static_cast<std::size_t>(targets[i]);
    out.loss += (std::log(sum) + m - r[t]);
    for (std::size_t j = 0; j < k; ++j) g[j] = (g[j] / sum) * inv_n;
    g[t] -= inv_n;
  }
  out.loss *= inv_n;
  return out;
}

/// Mean squared elementwise difference.
inline LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "mse_loss");
  LossResult out{0.0, Matrix(pred.rows(), pred.cols())};
  if (pred.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pred.size());
  const auto p = pred.values();
  const auto t = target.values();
  auto g = out.grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    out.loss += d * d;
    g[i] = 2.0 * d * inv;
  }
  out.loss *= inv;
  return out;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace rae
