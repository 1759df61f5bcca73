#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rae/grad_check.hpp"
#include "rae/model.hpp"
#include "rae/nn.hpp"
#include "rae/random.hpp"
#include "rae/schedule.hpp"
#include "rae/trainer.hpp"

namespace rae {

struct NamedGradCheck {
  std::string name;
  std::size_t parameters = 0;
  GradCheckReport report;
};

namespace diagnostics_detail {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = unit(rng);
  return m;
}

inline std::size_t count(std::span<const ParamSlot> p) {
  std::size_t n = 0;
  for (const auto& s : p) n += s.value.size();
  return n;
}

/// Small random batch with every subject present.
inline TrainingSet random_batch(const ModelDims& d, std::size_t rows, Rng& rng) {
  TrainingSet t{random_matrix(rows, d.channels, rng), {}, {}};
  for (std::size_t i = 0; i < rows; ++i) {
    t.subjects.push_back(static_cast<int>(i % d.subjects));
    t.labels.push_back(static_cast<int>(i % d.classes));
  }
  return t;
}

/// Glorot init leaves biases at zero, so an input row that silences every hidden unit sits
/// exactly on the rectifier kink. Random biases move the check point off it.
inline void randomize_biases(std::span<const ParamSlot> params, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 0.5);
  for (const auto& p : params) {
    if (p.name.find(".b") != std::string::npos) {
      for (double& v : p.value) v = unit(rng);
    }
  }
}

/// Smallest |pre-activation| over the rectifier units of `net` on `input`.
inline double rectifier_margin(const Sequential& net, const Matrix& input) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix x = input;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const DenseLayer& l = net.layer(i);
    if (l.activation() == Activation::rectifier) {
      const DenseLayer linear(l.weights(), l.bias(), Activation::identity);
      const Matrix pre = linear.infer(x);
      for (double v : pre.values()) margin = std::min(margin, std::abs(v));
    }
    x = l.infer(x);
  }
  return margin;
}

// Finite differences straddling a rectifier kink disagree with any one-sided derivative, so the
// checks only run where every rectifier unit is at least this far from its kink.
inline constexpr double kKinkMargin = 1e-2;
inline constexpr int kMaxDraws = 1000;

}  // namespace diagnostics_detail

/// Finite-difference checks of each layer kind, each loss, the composite encoder/decoder
/// objective (lambda_A = 0.5, lambda_N = 0.05, masks fixed) and the discriminator losses, on
/// randomized networks of at most a few hundred parameters.
inline std::vector<NamedGradCheck> gradient_suite(double tolerance = 1e-5, std::uint64_t seed = 0) {
  using namespace diagnostics_detail;
  GradCheckOptions opt;
  opt.tolerance = tolerance;
  std::vector<NamedGradCheck> out;
  Rng rng(derive_seed(seed, {0x6772ad}));

  for (Activation act : {Activation::identity, Activation::rectifier}) {
    Sequential net({DenseLayer::glorot(4, 3, act, rng)});
    std::vector<ParamSlot> p;
    net.collect_params("dense", p);
    Matrix x;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
      randomize_biases(p, rng);
      x = random_matrix(6, 4, rng);
      if (rectifier_margin(net, x) >= kKinkMargin) break;
    }
    const Matrix target = random_matrix(6, 3, rng);
    const auto with_grad = [&] {
      net.zero_grad();
      const LossResult l = mse_loss(net.forward(x), target);
      net.backward(l.grad);
      return l.loss;
    };
    const auto value = [&] { return mse_loss(net.infer(x), target).loss; };
    out.push_back({act == Activation::identity ? "dense identity" : "dense rectifier", count(p),
                   grad_check(p, with_grad, value, opt)});
  }

  {
    // Logits are the parameters, so the loss gradient itself is what gets checked.
    Sequential net({DenseLayer(random_matrix(5, 5, rng), std::vector<double>(5, 0.0), Activation::identity)});
    Matrix eye(5, 5, 0.0);
    for (std::size_t i = 0; i < 5; ++i) eye(i, i) = 1.0;
    const std::vector<int> targets{0, 3, 1, 4, 2};
    std::vector<ParamSlot> p;
    net.collect_params("logits", p);
    const auto with_grad = [&] {
      net.zero_grad();
      const LossResult l = softmax_cross_entropy(net.forward(eye), targets);
      net.backward(l.grad);
      return l.loss;
    };
    const auto value = [&] { return softmax_cross_entropy(net.infer(eye), targets).loss; };
    out.push_back({"softmax cross-entropy", count(p), grad_check(p, with_grad, value, opt)});
  }

  {
    Sequential net = make_two_layer(3, 5, 4, rng);
    std::vector<ParamSlot> p;
    net.collect_params("mlp", p);
    Matrix x;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
      randomize_biases(p, rng);
      x = random_matrix(7, 3, rng);
      if (rectifier_margin(net, x) >= kKinkMargin) break;
    }
    const Matrix target = random_matrix(7, 4, rng);
    const auto with_grad = [&] {
      net.zero_grad();
      const LossResult l = mse_loss(net.forward(x), target);
      net.backward(l.grad);
      return l.loss;
    };
    const auto value = [&] { return mse_loss(net.infer(x), target).loss; };
    out.push_back({"mean squared error (two-layer)", count(p), grad_check(p, with_grad, value, opt)});
  }

  const ModelDims dims{4, 6, 5, 3};
  for (VariantTag tag : kAllVariants) {
    ModelBundle b = build_model(tag, dims, {}, derive_seed(seed, {static_cast<std::uint64_t>(tag)}));
    TrainingSet batch;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
      randomize_biases(b.all_params(), rng);
      batch = random_batch(dims, 10, rng);
      const Matrix z = encode(b, batch.inputs);
      const double margin = std::min(rectifier_margin(b.encoder, batch.inputs),
                                     rectifier_margin(b.decoder, decoder_input(b, z, batch.subjects)));
      if (margin >= kKinkMargin) break;
    }
    TrainConfig cfg;
    cfg.lambda_adversary = b.variant.use_adversary ? 0.5 : 0.0;
    cfg.lambda_nuisance = b.variant.use_nuisance ? 0.05 : 0.0;
    std::optional<MaskBatch> masks;
    if (b.schedule) masks = sample_masks(*b.schedule, batch.size(), rng);
    const MaskBatch* mp = masks ? &*masks : nullptr;
    auto p = b.encoder_decoder_params();
    const auto with_grad = [&] { return composite_loss(b, batch, mp, cfg, true).total; };
    const auto value = [&] { return composite_loss(b, batch, mp, cfg, false).total; };
    out.push_back({std::string(to_string(tag)) + " composite", count(p), grad_check(p, with_grad, value, opt)});

    for (Head h : {Head::adversary, Head::nuisance}) {
      if (!b.variant.has_head(h)) continue;
      Sequential& net = b.head(h);
      const Matrix z = hadamard(encode(b, batch.inputs), masks->view(h));
      auto hp = b.head_params(h);
      const auto head_grad = [&] {
        net.zero_grad();
        const LossResult l = softmax_cross_entropy(net.forward(z), batch.subjects);
        net.backward(l.grad);
        return l.loss;
      };
      const auto head_value = [&] { return softmax_cross_entropy(net.infer(z), batch.subjects).loss; };
      out.push_back({std::string(to_string(tag)) + " " + std::string(to_string(h)), count(hp),
                     grad_check(hp, head_grad, head_value, opt)});
    }
  }
  return out;
}

}  // namespace rae
