#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/nn.hpp"
#include "rae/random.hpp"
#include "rae/schedule.hpp"

namespace rae {

enum class VariantTag { AE, cAE, A_cAE, D_cAE, DA_cAE, A_cRAE, D_cRAE, DA_cRAE };

inline constexpr std::array<VariantTag, 8> kAllVariants{
    VariantTag::AE,     VariantTag::cAE,    VariantTag::A_cAE,  VariantTag::D_cAE,
    VariantTag::DA_cAE, VariantTag::A_cRAE, VariantTag::D_cRAE, VariantTag::DA_cRAE};

inline std::string_view to_string(VariantTag t) {
  switch (t) {
    case VariantTag::AE: return "AE";
    case VariantTag::cAE: return "cAE";
    case VariantTag::A_cAE: return "A-cAE";
    case VariantTag::D_cAE: return "D-cAE";
    case VariantTag::DA_cAE: return "DA-cAE";
    case VariantTag::A_cRAE: return "A-cRAE";
    case VariantTag::D_cRAE: return "D-cRAE";
    case VariantTag::DA_cRAE: return "DA-cRAE";
  }
  return "?";
}

inline VariantTag parse_variant(std::string_view s) {
  for (auto t : kAllVariants) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

/// Structural flags implied by a variant tag.
struct ModelVariant {
  VariantTag tag = VariantTag::AE;
  bool conditional = false;
  ScheduleKind schedule = ScheduleKind::none;
  bool use_adversary = false;
  bool use_nuisance = false;

  static ModelVariant from_tag(VariantTag tag) {
    ModelVariant v;
    v.tag = tag;
    v.conditional = tag != VariantTag::AE;
    switch (tag) {
      case VariantTag::AE:
      case VariantTag::cAE: break;
      case VariantTag::A_cAE: v.schedule = ScheduleKind::hard; v.use_adversary = true; break;
      case VariantTag::D_cAE: v.schedule = ScheduleKind::hard; v.use_nuisance = true; break;
      case VariantTag::DA_cAE:
        v.schedule = ScheduleKind::hard;
        v.use_adversary = v.use_nuisance = true;
        break;
      case VariantTag::A_cRAE: v.schedule = ScheduleKind::soft; v.use_adversary = true; break;
      case VariantTag::D_cRAE: v.schedule = ScheduleKind::soft; v.use_nuisance = true; break;
      case VariantTag::DA_cRAE:
        v.schedule = ScheduleKind::soft;
        v.use_adversary = v.use_nuisance = true;
        break;
    }
    return v;
  }

  bool has_head(Head h) const { return h == Head::adversary ? use_adversary : use_nuisance; }
  bool operator==(const ModelVariant&) const = default;
};

struct ModelDims {
  std::size_t channels = 7;  // C
  std::size_t latent = 15;   // D
  std::size_t subjects = 20; // S
  std::size_t classes = 4;   // L

  bool operator==(const ModelDims&) const = default;
};

struct ScheduleParams {
  double alpha = 3.0;
  std::size_t ratio_adversary = 2;
  std::size_t ratio_nuisance = 1;
  // When set, must agree with the variant.
  std::optional<ScheduleKind> kind;
};

/// All five networks of one feature extractor plus the task MLP.
struct ModelBundle {
  ModelVariant variant;
  ModelDims dims;
  std::optional<DropoutSchedule> schedule;
  Sequential encoder;     // theta: FC(C, D) -> ReLU -> FC(D, D)
  Sequential decoder;     // eta: FC(D [+ S], D) -> ReLU -> FC(D, C)
  std::optional<Sequential> adversary;  // phi: FC(D, S)
  std::optional<Sequential> nuisance;   // psi: FC(D, S)
  Sequential classifier;  // gamma: FC(D, D) -> ReLU -> FC(D, L)

  std::size_t decoder_input_width() const {
    return dims.latent + (variant.conditional ? dims.subjects : 0);
  }

  const Sequential& head(Head h) const {
    const auto& net = h == Head::adversary ? adversary : nuisance;
    if (!net) {
      throw ConfigError(std::string(to_string(variant.tag)) + " has no " +
                        std::string(to_string(h)) + " network");
    }
    return *net;
  }
  Sequential& head(Head h) {
    return const_cast<Sequential&>(static_cast<const ModelBundle&>(*this).head(h));
  }

  /// Swaps in a different schedule over the same latent width. Used to realize one variant's
  /// masking with another's split, e.g. a soft-split model running a step schedule.
  void replace_schedule(DropoutSchedule s) {
    if (!variant.use_adversary && !variant.use_nuisance) {
      throw ConfigError("variant without discriminator heads takes no schedule");
    }
    if (s.dim != dims.latent) throw DimensionError("schedule width does not match latent width");
    schedule = std::move(s);
  }

  std::vector<ParamSlot> encoder_decoder_params() {
    std::vector<ParamSlot> out;
    encoder.collect_params("encoder", out);
    decoder.collect_params("decoder", out);
    return out;
  }

  std::vector<ParamSlot> head_params(Head h) {
    std::vector<ParamSlot> out;
    head(h).collect_params(std::string(to_string(h)), out);
    return out;
  }

  /// Every tensor, in serialization order.
  std::vector<ParamSlot> all_params() {
    std::vector<ParamSlot> out = encoder_decoder_params();
    if (adversary) adversary->collect_params("adversary", out);
    if (nuisance) nuisance->collect_params("nuisance", out);
    classifier.collect_params("classifier", out);
    return out;
  }

  bool same_parameters(const ModelBundle& o) const {
    const auto opt_same = [](const std::optional<Sequential>& a, const std::optional<Sequential>& b) {
      return a.has_value() == b.has_value() && (!a || a->same_parameters(*b));
    };
    return variant == o.variant && dims == o.dims && schedule == o.schedule &&
           encoder.same_parameters(o.encoder) && decoder.same_parameters(o.decoder) &&
           opt_same(adversary, o.adversary) && opt_same(nuisance, o.nuisance) &&
           classifier.same_parameters(o.classifier);
  }
};

/// Networks are initialized from per-network streams derived from `seed`, so the encoder and
/// decoder of two variants built with the same seed start identical.
inline ModelBundle build_model(VariantTag tag, ModelDims dims, const ScheduleParams& sp,
                               std::uint64_t seed) {
  if (dims.channels == 0 || dims.latent == 0 || dims.subjects == 0 || dims.classes == 0) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  ModelBundle b;
  b.variant = ModelVariant::from_tag(tag);
  b.dims = dims;
  if (sp.kind && *sp.kind != b.variant.schedule) {
    throw ConfigError(std::string(to_string(tag)) + " requires a " +
                      std::string(to_string(b.variant.schedule)) + " schedule, got " +
                      std::string(to_string(*sp.kind)));
  }
  if (b.variant.schedule == ScheduleKind::soft) {
    b.schedule = make_soft_schedule(dims.latent, sp.alpha);
  } else if (b.variant.schedule == ScheduleKind::hard) {
    b.schedule = make_hard_schedule(dims.latent, sp.ratio_adversary, sp.ratio_nuisance);
  }

  Rng enc(derive_seed(seed, {stream::kEncoder}));
  Rng dec(derive_seed(seed, {stream::kDecoder}));
  Rng adv(derive_seed(seed, {stream::kAdversary}));
  Rng nui(derive_seed(seed, {stream::kNuisance}));
  Rng cls(derive_seed(seed, {stream::kClassifier}));
  b.encoder = make_two_layer(dims.channels, dims.latent, dims.latent, enc);
  b.decoder = make_two_layer(b.decoder_input_width(), dims.latent, dims.channels, dec);
  if (b.variant.use_adversary) {
    b.adversary = Sequential({DenseLayer::glorot(dims.latent, dims.subjects, Activation::identity, adv)});
  }
  if (b.variant.use_nuisance) {
    b.nuisance = Sequential({DenseLayer::glorot(dims.latent, dims.subjects, Activation::identity, nui)});
  }
  b.classifier = make_two_layer(dims.latent, dims.latent, dims.classes, cls);
  return b;
}

/// z = g(X; theta)
inline Matrix encode(const ModelBundle& b, const Matrix& inputs) {
  if (inputs.cols() != b.dims.channels) {
    throw DimensionError("encode expects " + std::to_string(b.dims.channels) + " channels, got " +
                         std::to_string(inputs.cols()));
  }
  return b.encoder.infer(inputs);
}

/// Decoder input: z, followed by the one-hot subject code for conditional variants. Subject
/// codes are 0-based.
inline Matrix decoder_input(const ModelBundle& b, const Matrix& latent,
                            std::optional<std::span<const int>> subjects) {
  if (latent.cols() != b.dims.latent) throw DimensionError("decoder expects D latent columns");
  if (!b.variant.conditional) return latent;
  if (!subjects) {
    throw ArgumentError(std::string(to_string(b.variant.tag)) + " decoder needs subject codes");
  }
  if (subjects->size() != latent.rows()) throw DimensionError("one subject code per latent row");
  return hconcat(latent, one_hot(*subjects, b.dims.subjects));
}

/// X^ = h(z, s; eta). The full latent is used; masks never reach the decoder.
inline Matrix decode(const ModelBundle& b, const Matrix& latent,
                     std::optional<std::span<const int>> subjects = std::nullopt) {
  return b.decoder.infer(decoder_input(b, latent, subjects));
}

/// Subject logits from z masked elementwise by `mask` (n x D, 0/1 per sample).
inline Matrix discriminate(const ModelBundle& b, Head head, const Matrix& latent, const Matrix& mask) {
  return b.head(head).infer(hadamard(latent, mask));
}

/// Subject logits from z scaled per node, typically by expectation_mask().
inline Matrix discriminate(const ModelBundle& b, Head head, const Matrix& latent,
                           std::span<const double> node_scale) {
  return b.head(head).infer(scale_columns(latent, node_scale));
}

/// Task logits from the full latent.
inline Matrix classify(const ModelBundle& b, const Matrix& latent) {
  if (latent.cols() != b.dims.latent) throw DimensionError("classifier expects D latent columns");
  return b.classifier.infer(latent);
}

namespace detail {

inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw IoError("model file: bad number '" + tok + "'");
  return v;
}

inline void write_vector(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << hex_double(v[i]);
  os << '\n';
}

inline std::vector<double> read_vector(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  std::string tok;
  for (auto& x : v) {
    if (!(is >> tok)) throw IoError("model file: truncated tensor data");
    x = parse_double(tok);
  }
  return v;
}

}  // namespace detail

inline constexpr std::string_view kModelMagic = "rae-model";
inline constexpr int kModelFormatVersion = 1;

/// Text container with hex-float values; load_model(save_model(b)) is bit-identical to b.
inline void save_model(ModelBundle& b, std::ostream& os) {
  os << kModelMagic << ' ' << kModelFormatVersion << '\n';
  os << "variant " << to_string(b.variant.tag) << '\n';
  os << "dims " << b.dims.channels << ' ' << b.dims.latent << ' ' << b.dims.subjects << ' '
     << b.dims.classes << '\n';
  if (b.schedule) {
    const auto& s = *b.schedule;
    os << "schedule " << to_string(s.kind) << ' ' << s.dim << ' ' << detail::hex_double(s.alpha) << ' '
       << s.split_index << '\n';
    detail::write_vector(os, s.drop_adversary);
    detail::write_vector(os, s.drop_nuisance);
  } else {
    os << "schedule none\n";
  }
  const auto params = b.all_params();
  os << "tensors " << params.size() << '\n';
  for (const auto& p : params) {
    os << "tensor " << p.name << ' ' << p.value.size() << '\n';
    detail::write_vector(os, p.value);
  }
  os << "end\n";
}

inline ModelBundle load_model(std::istream& is) {
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != kModelMagic) throw IoError("not a model file");
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }
  std::string tag;
  if (!(is >> word >> tag) || word != "variant") throw IoError("model file: missing variant");
  ModelDims dims;
  if (!(is >> word >> dims.channels >> dims.latent >> dims.subjects >> dims.classes) || word != "dims") {
    throw IoError("model file: missing dims");
  }
  ModelBundle b = build_model(parse_variant(tag), dims, ScheduleParams{}, 0);
  std::string kind;
  if (!(is >> word >> kind) || word != "schedule") throw IoError("model file: missing schedule");
  if (kind == "none") {
    b.schedule.reset();
  } else {
    DropoutSchedule s;
    std::string alpha;
    s.kind = parse_schedule_kind(kind);
    if (!(is >> s.dim >> alpha >> s.split_index)) throw IoError("model file: bad schedule header");
    s.alpha = detail::parse_double(alpha);
    s.drop_adversary = detail::read_vector(is, s.dim);
    s.drop_nuisance = detail::read_vector(is, s.dim);
    b.schedule = std::move(s);
  }
  std::size_t count = 0;
  if (!(is >> word >> count) || word != "tensors") throw IoError("model file: missing tensor count");
  auto params = b.all_params();
  if (count != params.size()) throw IoError("model file: tensor count does not match variant");
  for (auto& p : params) {
    std::string name;
    std::size_t n = 0;
    if (!(is >> word >> name >> n) || word != "tensor") throw IoError("model file: bad tensor header");
    if (name != p.name || n != p.value.size()) {
      throw IoError("model file: expected tensor " + p.name + " of " + std::to_string(p.value.size()) +
                    " values, found " + name);
    }
    const auto v = detail::read_vector(is, n);
    std::copy(v.begin(), v.end(), p.value.begin());
  }
  if (!(is >> word) || word != "end") throw IoError("model file: missing end marker");
  return b;
}

}  // namespace rae
