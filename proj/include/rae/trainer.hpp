#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rae/classifiers.hpp"
#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/model.hpp"
#include "rae/nn.hpp"
#include "rae/optimizer.hpp"
#include "rae/random.hpp"
#include "rae/schedule.hpp"

namespace rae {

/// Samples handed to the trainer. Subject codes are 0-based (subject id - 1).
struct TrainingSet {
  Matrix inputs;
  std::vector<int> subjects;
  std::vector<int> labels;

  std::size_t size() const noexcept { return inputs.rows(); }

  TrainingSet rows(std::span<const std::size_t> idx) const {
    TrainingSet out{gather_rows(inputs, idx), {}, {}};
    out.subjects.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (auto i : idx) {
      out.subjects.push_back(subjects[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

struct TrainConfig {
  double lambda_adversary = 0.0;
  double lambda_nuisance = 0.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;  // progress callback cadence in epochs; 0 disables it

  void validate() const {
    if (!(lambda_adversary >= 0.0) || !(lambda_nuisance >= 0.0)) throw ConfigError("lambdas must be >= 0");
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double reconstruction = 0.0;
  std::optional<double> adversary_ce;
  std::optional<double> nuisance_ce;
  std::optional<double> adversary_accuracy;
  std::optional<double> nuisance_accuracy;

  bool operator==(const EpochRecord&) const = default;
};

/// One record per epoch. Wall-clock times are kept alongside but excluded from equality.
struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> wall_seconds;

  bool operator==(const TrainLog& o) const { return epochs == o.epochs; }
};

/// `epoch,total,recon,adv_ce,nui_ce,adv_acc,nui_acc`; absent values are empty fields.
inline void write_train_log_csv(const TrainLog& log, std::ostream& os) {
  os << "epoch,total,recon,adv_ce,nui_ce,adv_acc,nui_acc\n";
  char buf[40];
  const auto put = [&](const std::optional<double>& v) {
    os << ',';
    if (v) {
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      os << buf;
    }
  };
  for (const auto& e : log.epochs) {
    os << e.epoch;
    put(e.total);
    put(e.reconstruction);
    put(e.adversary_ce);
    put(e.nuisance_ce);
    put(e.adversary_accuracy);
    put(e.nuisance_accuracy);
    os << '\n';
  }
}

/// One optimizer per player.
struct PlayerOptimizers {
  Optimizer encoder_decoder;
  Optimizer adversary;
  Optimizer nuisance;

  explicit PlayerOptimizers(const OptimizerSettings& s) : encoder_decoder(s), adversary(s), nuisance(s) {}
};

struct DiscriminatorLosses {
  std::optional<double> adversary_ce;
  std::optional<double> nuisance_ce;
};

/// One step for each present head on CE(s | z * mask). z comes from a forward pass that is not
/// differentiated, so the encoder is untouched.
inline DiscriminatorLosses discriminator_step(ModelBundle& b, const TrainingSet& batch, const MaskBatch& masks,
                                              PlayerOptimizers& opt) {
  DiscriminatorLosses out;
  if (!b.adversary && !b.nuisance) return out;
  const Matrix z = encode(b, batch.inputs);
  for (Head h : {Head::adversary, Head::nuisance}) {
    if (!b.variant.has_head(h)) continue;
    Sequential& net = b.head(h);
    net.zero_grad();
    const LossResult ce = softmax_cross_entropy(net.forward(hadamard(z, masks.view(h))), batch.subjects);
    net.backward(ce.grad);
    const auto slots = b.head_params(h);
    (h == Head::adversary ? opt.adversary : opt.nuisance).step(slots);
    (h == Head::adversary ? out.adversary_ce : out.nuisance_ce) = ce.loss;
  }
  return out;
}

struct CompositeLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  std::optional<double> adversary_ce;
  std::optional<double> nuisance_ce;
};

/// Encoder/decoder objective
///   MSE(X^, X) + lambda_N * CE(s | z * m_n) - lambda_A * CE(s | z * m_a),
/// i.e. -log p + lambda_N * (-log q_psi) + lambda_A * log q_phi. With `backprop`, encoder and
/// decoder gradients are left in their accumulators (zeroed first); head gradients are garbage
/// afterwards. Head terms with a zero weight are evaluated for bookkeeping but not differentiated.
inline CompositeLoss composite_loss(ModelBundle& b, const TrainingSet& batch, const MaskBatch* masks,
                                    const TrainConfig& cfg, bool backprop) {
  if (cfg.lambda_adversary > 0.0 && !b.adversary) {
    throw ConfigError(std::string(to_string(b.variant.tag)) + " has no adversary but lambda_A > 0");
  }
  if (cfg.lambda_nuisance > 0.0 && !b.nuisance) {
    throw ConfigError(std::string(to_string(b.variant.tag)) + " has no nuisance network but lambda_N > 0");
  }
  if ((b.adversary || b.nuisance) && masks == nullptr) throw ArgumentError("discriminator masks required");
  if (backprop) {
    b.encoder.zero_grad();
    b.decoder.zero_grad();
  }
  CompositeLoss out;
  const Matrix z = b.encoder.forward(batch.inputs);
  const Matrix recon = b.decoder.forward(decoder_input(b, z, batch.subjects));
  LossResult mse = mse_loss(recon, batch.inputs);
  out.reconstruction = mse.loss;
  out.total = mse.loss;
  Matrix grad_z;
  if (backprop) grad_z = column_block(b.decoder.backward(mse.grad), 0, b.dims.latent);

  for (Head h : {Head::adversary, Head::nuisance}) {
    if (!b.variant.has_head(h)) continue;
    const Matrix& m = masks->view(h);
    Sequential& net = b.head(h);
    LossResult ce = softmax_cross_entropy(net.forward(hadamard(z, m)), batch.subjects);
    // Adversary enters with a negative weight on its CE, nuisance with a positive one.
    const double weight = h == Head::adversary ? -cfg.lambda_adversary : cfg.lambda_nuisance;
    (h == Head::adversary ? out.adversary_ce : out.nuisance_ce) = ce.loss;
    out.total += weight * ce.loss;
    if (backprop && weight != 0.0) {
      for (double& g : ce.grad.values()) g *= weight;
      const Matrix gz = hadamard(net.backward(ce.grad), m);
      auto dst = grad_z.values();
      const auto src = gz.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  if (backprop) b.encoder.backward(grad_z);
  return out;
}

/// One step of theta and eta on the composite objective; phi and psi are not modified.
inline CompositeLoss encoder_decoder_step(ModelBundle& b, const TrainingSet& batch, const MaskBatch* masks,
                                          const TrainConfig& cfg, PlayerOptimizers& opt) {
  const CompositeLoss l = composite_loss(b, batch, masks, cfg, true);
  if (!std::isfinite(l.total)) {
    throw NumericError("non-finite composite loss: recon=" + std::to_string(l.reconstruction) +
                       " adv_ce=" + std::to_string(l.adversary_ce.value_or(0.0)) +
                       " nui_ce=" + std::to_string(l.nuisance_ce.value_or(0.0)));
  }
  const auto slots = b.encoder_decoder_params();
  opt.encoder_decoder.step(slots);
  return l;
}

struct DiscriminatorAccuracy {
  std::optional<double> adversary;
  std::optional<double> nuisance;
};

/// Subject-ID accuracy of each present head on expectation-scaled z. Absent heads are nullopt.
inline DiscriminatorAccuracy evaluate_discriminators(const ModelBundle& b, const TrainingSet& data) {
  DiscriminatorAccuracy out;
  if (data.size() == 0 || !b.schedule) return out;
  const Matrix z = encode(b, data.inputs);
  for (Head h : {Head::adversary, Head::nuisance}) {
    if (!b.variant.has_head(h)) continue;
    const auto scale = expectation_mask(*b.schedule, h);
    const double acc = accuracy(argmax_rows(discriminate(b, h, z, scale)), data.subjects);
    (h == Head::adversary ? out.adversary : out.nuisance) = acc;
  }
  return out;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Alternating optimization: per mini-batch, one step for each present discriminator on fresh
/// masks, then one encoder/decoder step on another fresh draw. Batch order and masks come from
/// separate streams of cfg.seed.
inline TrainLog train_feature_extractor(ModelBundle& b, const TrainingSet& train, const TrainingSet& val,
                                        const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train.size() == 0) throw ArgumentError("train_feature_extractor: empty training set");
  const bool heads = b.adversary.has_value() || b.nuisance.has_value();
  if (heads && !b.schedule) throw ConfigError("discriminator heads need a dropout schedule");

  PlayerOptimizers opt(cfg.optimizer);
  Rng order_rng(derive_seed(cfg.seed, {stream::kShuffle}));
  Rng mask_rng(derive_seed(cfg.seed, {stream::kMasks}));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0, recon = 0.0, adv = 0.0, nui = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const TrainingSet batch = train.rows(std::span<const std::size_t>(order.data() + start, end - start));
      const auto weight = static_cast<double>(end - start);
      std::optional<MaskBatch> masks;
      if (heads) {
        const MaskBatch disc_masks = sample_masks(*b.schedule, batch.size(), mask_rng);
        discriminator_step(b, batch, disc_masks, opt);
        masks = sample_masks(*b.schedule, batch.size(), mask_rng);
      }
      const CompositeLoss l = encoder_decoder_step(b, batch, masks ? &*masks : nullptr, cfg, opt);
      total += weight * l.total;
      recon += weight * l.reconstruction;
      adv += weight * l.adversary_ce.value_or(0.0);
      nui += weight * l.nuisance_ce.value_or(0.0);
    }
    const double n = static_cast<double>(train.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.total = total / n;
    rec.reconstruction = recon / n;
    if (b.adversary) rec.adversary_ce = adv / n;
    if (b.nuisance) rec.nuisance_ce = nui / n;
    const DiscriminatorAccuracy acc = evaluate_discriminators(b, val);
    rec.adversary_accuracy = acc.adversary;
    rec.nuisance_accuracy = acc.nuisance;
    log.epochs.push_back(rec);
    log.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (on_epoch && cfg.log_every > 0 && epoch % cfg.log_every == 0) on_epoch(rec);
  }
  b.encoder.clear_cache();
  b.decoder.clear_cache();
  if (b.adversary) b.adversary->clear_cache();
  if (b.nuisance) b.nuisance->clear_cache();
  return log;
}

struct TrainedClassifier {
  FittedClassifier model;
  double validation_accuracy = 0.0;
};

/// Fits a task classifier on z = g(X; theta) of the frozen bundle (full z, no masks). The mlp
/// kind starts from the bundle's gamma network.
inline TrainedClassifier train_classifier(const ModelBundle& b, const ClassifierKind& kind, const TrainingSet& train,
                                          const TrainingSet& val) {
  validate(kind);
  const Matrix z_train = encode(b, train.inputs);
  std::optional<FittedClassifier> model;
  if (const auto* p = std::get_if<MlpParams>(&kind)) {
    model.emplace(fit_mlp(b.classifier, z_train, train.labels, *p, b.dims.classes));
  } else {
    model.emplace(fit(kind, z_train, train.labels, b.dims.classes));
  }
  const double val_acc = val.size() == 0 ? 0.0 : accuracy(model->predict(encode(b, val.inputs)), val.labels);
  return {std::move(*model), val_acc};
}

}  // namespace rae
