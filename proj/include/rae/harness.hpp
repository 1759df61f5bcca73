#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rae/classifiers.hpp"
#include "rae/dataset.hpp"
#include "rae/errors.hpp"
#include "rae/model.hpp"
#include "rae/parallel.hpp"
#include "rae/random.hpp"
#include "rae/stats.hpp"
#include "rae/trainer.hpp"

namespace rae {

inline constexpr std::string_view kArtifactVersion = "rae 1.0.0";

/// A feature extractor configuration compared inside one experiment.
struct ModelSpec {
  VariantTag variant = VariantTag::DA_cRAE;
  double lambda_adversary = 0.0;
  double lambda_nuisance = 0.0;

  std::string label() const { return std::string(to_string(variant)); }
  bool operator==(const ModelSpec&) const = default;
};

struct DataSource {
  std::optional<std::string> csv_path;  // synthetic when empty
  SynthParams synth;

  bool operator==(const DataSource&) const = default;
};

struct ExperimentConfig {
  ModelSpec model{VariantTag::DA_cRAE, 0.5, 0.05};
  TrainConfig train;  // lambdas here are ignored; ModelSpec carries them
  std::size_t latent_dim = 15;
  double alpha = 3.0;
  std::size_t ratio_adversary = 2;
  std::size_t ratio_nuisance = 1;
  std::vector<ClassifierKind> classifiers{MlpParams{}};
  std::vector<std::size_t> dim_grid{3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25};
  std::vector<double> lambda_adversary_grid{0, 0.01, 0.05, 0.1, 0.2, 0.5};
  std::vector<double> lambda_nuisance_grid{0, 0.005, 0.01, 0.05, 0.2, 0.5};
  double tie_tolerance = 0.005;  // accuracy as a fraction: 0.5 points
  double data_fraction = 1.0;
  std::vector<double> fractions{1.0, 0.5, 0.25, 0.1};
  std::vector<ModelSpec> compare{{VariantTag::DA_cRAE, 0.5, 0.05},
                                 {VariantTag::DA_cAE, 0.01, 0.005},
                                 {VariantTag::cAE, 0.0, 0.0},
                                 {VariantTag::AE, 0.0, 0.0}};
  std::vector<std::uint64_t> seeds{0};
  std::size_t max_folds = 0;  // 0: hold out every subject
  std::size_t jobs = 1;
  DataSource data;

  void validate() const {
    train.validate();
    if (latent_dim < 2) throw ConfigError("latent dimension must be >= 2");
    if (classifiers.empty()) throw ConfigError("at least one classifier kind is required");
    for (const auto& k : classifiers) rae::validate(k);
    if (dim_grid.empty() || lambda_adversary_grid.empty() || lambda_nuisance_grid.empty() || fractions.empty() ||
        seeds.empty()) {
      throw ConfigError("grids and seed list must be non-empty");
    }
    const auto in_unit = [](double f) { return f > 0.0 && f <= 1.0; };
    if (!in_unit(data_fraction) || !std::all_of(fractions.begin(), fractions.end(), in_unit)) {
      throw ConfigError("data fractions must lie in (0, 1]");
    }
    for (double l : lambda_adversary_grid) if (!(l >= 0.0)) throw ConfigError("lambda grid values must be >= 0");
    for (double l : lambda_nuisance_grid) if (!(l >= 0.0)) throw ConfigError("lambda grid values must be >= 0");
    if (!(tie_tolerance >= 0.0)) throw ConfigError("tie tolerance must be >= 0");
    check_heads(model);
    for (const ModelSpec& m : compare) check_heads(m);
  }

  static void check_heads(const ModelSpec& m) {
    const ModelVariant v = ModelVariant::from_tag(m.variant);
    if (!(m.lambda_adversary >= 0.0) || !(m.lambda_nuisance >= 0.0)) throw ConfigError("lambdas must be >= 0");
    if (m.lambda_adversary > 0.0 && !v.use_adversary) {
      throw ConfigError(m.label() + " has no adversary; lambda_A must be 0");
    }
    if (m.lambda_nuisance > 0.0 && !v.use_nuisance) {
      throw ConfigError(m.label() + " has no nuisance network; lambda_N must be 0");
    }
  }

  bool operator==(const ExperimentConfig&) const = default;
};

struct FoldResult {
  int subject = 0;
  std::uint64_t seed = 0;
  std::uint64_t split_hash = 0;
  std::map<std::string, double> test_accuracy;        // by classifier tag
  std::map<std::string, double> validation_accuracy;  // by classifier tag
  std::optional<double> adversary_accuracy;
  std::optional<double> nuisance_accuracy;
  TrainLog log;

  bool operator==(const FoldResult&) const = default;
};

struct EvalReport {
  ExperimentConfig config;
  ModelSpec model;
  double data_fraction = 1.0;
  std::size_t latent_dim = 15;
  std::vector<FoldResult> folds;  // seed-major, subjects ascending
  std::map<std::string, Summary> summaries;

  bool operator==(const EvalReport&) const = default;
};

/// Loaded data of one seed with its dimensions.
struct Dataset {
  SampleTable table;
  DatasetMeta meta;
  std::vector<int> subjects;
};

/// CSV sources are read once and class-balanced; synthetic sources draw a fresh world per seed.
inline Dataset load_dataset(const DataSource& src, std::uint64_t seed) {
  Dataset d;
  if (src.csv_path) {
    LoadedDataset l = load_csv(*src.csv_path);
    d.table = balance_relaxation(l.table);
    d.meta = compute_meta(d.table, kContractClasses);
  } else {
    d.table = synth_generate(src.synth, seed);
    d.meta = compute_meta(d.table, src.synth.classes);
    d.meta.subjects = src.synth.subjects;
  }
  d.subjects = subject_ids(d.table);
  if (d.subjects.size() < 2) throw ArgumentError("leave-one-subject-out needs at least two subjects");
  return d;
}

inline TrainingSet to_training_set(const SampleTable& t, std::span<const std::size_t> rows) {
  TrainingSet s{gather_rows(t.signals, rows), {}, {}};
  for (auto r : rows) {
    s.subjects.push_back(t.subject[r] - 1);
    s.labels.push_back(t.label[r]);
  }
  return s;
}

/// Per-subject average over seeds of `value`, then box statistics.
inline Summary summarize_folds(std::span<const FoldResult> folds,
                               const std::function<std::optional<double>(const FoldResult&)>& value) {
  std::map<int, std::pair<double, std::size_t>> per_subject;
  for (const auto& f : folds) {
    if (const auto v = value(f)) {
      auto& [sum, n] = per_subject[f.subject];
      sum += *v;
      ++n;
    }
  }
  std::vector<double> values;
  for (const auto& [s, acc] : per_subject) values.push_back(acc.first / static_cast<double>(acc.second));
  return summarize_stats(values);
}

inline std::map<std::string, Summary> summarize_report(const EvalReport& r) {
  std::map<std::string, Summary> out;
  for (const auto& k : r.config.classifiers) {
    const std::string tag(kind_tag(k));
    out[tag] = summarize_folds(r.folds, [&tag](const FoldResult& f) -> std::optional<double> {
      const auto it = f.test_accuracy.find(tag);
      return it == f.test_accuracy.end() ? std::nullopt : std::optional<double>(it->second);
    });
  }
  return out;
}

/// Mean over folds of an optional per-fold value; nullopt when no fold has it.
inline std::optional<double> mean_of(std::span<const FoldResult> folds,
                                     const std::function<std::optional<double>(const FoldResult&)>& value) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& f : folds) {
    if (const auto v = value(f)) {
      s += *v;
      ++n;
    }
  }
  return n == 0 ? std::nullopt : std::optional<double>(s / static_cast<double>(n));
}

/// Split, normalize, train the feature extractor, freeze it, fit every classifier and test on
/// the held-out subject.
inline FoldResult run_fold(const Dataset& data, const ExperimentConfig& cfg, const ModelSpec& model,
                           std::size_t latent_dim, double fraction, std::uint64_t seed, int subject) {
  const auto s = static_cast<std::uint64_t>(subject);
  FoldSpec fold = loso_split(data.table, subject, derive_seed(seed, {stream::kSplit, s}));
  fold = subsample_fold(data.table, fold, fraction, derive_seed(seed, {stream::kSubsample, s}));
  const NormalizedTable norm = preprocess(data.table, fold.train);
  const TrainingSet train = to_training_set(norm.table, fold.train);
  const TrainingSet val = to_training_set(norm.table, fold.validation);
  const TrainingSet test = to_training_set(norm.table, fold.test);

  const ModelDims dims{data.meta.channels, latent_dim, data.meta.subjects, data.meta.classes};
  ScheduleParams sp;
  sp.alpha = cfg.alpha;
  sp.ratio_adversary = cfg.ratio_adversary;
  sp.ratio_nuisance = cfg.ratio_nuisance;
  ModelBundle bundle = build_model(model.variant, dims, sp, derive_seed(seed, {stream::kModel, s}));

  TrainConfig tc = cfg.train;
  tc.lambda_adversary = model.lambda_adversary;
  tc.lambda_nuisance = model.lambda_nuisance;
  tc.seed = derive_seed(seed, {stream::kShuffle, s});

  FoldResult r;
  r.subject = subject;
  r.seed = seed;
  r.split_hash = split_hash(fold);
  r.log = train_feature_extractor(bundle, train, val, tc);
  const DiscriminatorAccuracy disc = evaluate_discriminators(bundle, val);
  r.adversary_accuracy = disc.adversary;
  r.nuisance_accuracy = disc.nuisance;

  const Matrix z_test = encode(bundle, test.inputs);
  for (ClassifierKind kind : cfg.classifiers) {
    if (auto* p = std::get_if<MlpParams>(&kind)) p->seed = derive_seed(seed, {stream::kClassifier, s});
    const TrainedClassifier c = train_classifier(bundle, kind, train, val);
    const std::string tag(kind_tag(kind));
    r.validation_accuracy[tag] = c.validation_accuracy;
    r.test_accuracy[tag] = accuracy(c.model.predict(z_test), test.labels);
  }
  return r;
}

using ProgressFn = std::function<void(const std::string&)>;

/// Leave-one-subject-out evaluation of one model, for every seed in the config.
inline EvalReport run_loso(const ExperimentConfig& cfg, const ModelSpec& model, std::size_t latent_dim,
                           double fraction, const ProgressFn& progress = {}) {
  cfg.validate();
  ExperimentConfig::check_heads(model);
  std::vector<Dataset> data;
  for (auto seed : cfg.seeds) {
    if (cfg.data.csv_path && !data.empty()) {
      data.push_back(data.front());
    } else {
      data.push_back(load_dataset(cfg.data, seed));
    }
  }
  struct Task {
    std::size_t seed_index;
    int subject;
  };
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
    const auto& ids = data[k].subjects;
    const std::size_t n = cfg.max_folds == 0 ? ids.size() : std::min(cfg.max_folds, ids.size());
    for (std::size_t i = 0; i < n; ++i) tasks.push_back({k, ids[i]});
  }
  EvalReport report;
  report.config = cfg;
  report.model = model;
  report.data_fraction = fraction;
  report.latent_dim = latent_dim;
  report.folds.resize(tasks.size());
  std::mutex mu;
  parallel_for(tasks.size(), cfg.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::uint64_t seed = cfg.seeds[t.seed_index];
    try {
      report.folds[i] = run_fold(data[t.seed_index], cfg, model, latent_dim, fraction, seed, t.subject);
    } catch (const std::exception& e) {
      throw Error(model.label() + " fold (seed " + std::to_string(seed) + ", held-out subject " +
                  std::to_string(t.subject) + "): " + e.what());
    }
    if (progress) {
      std::lock_guard lock(mu);
      std::string line = model.label() + " seed " + std::to_string(seed) + " subject " + std::to_string(t.subject);
      for (const auto& [tag, acc] : report.folds[i].test_accuracy) line += " " + tag + "=" + std::to_string(acc);
      progress(line);
    }
  });
  report.summaries = summarize_report(report);
  return report;
}

inline EvalReport run_loso(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  return run_loso(cfg, cfg.model, cfg.latent_dim, cfg.data_fraction, progress);
}

// Lambda sweep -------------------------------------------------------------------------------

struct SweepCell {
  double lambda_adversary = 0.0;
  double lambda_nuisance = 0.0;
  int stage = 1;
  double task_accuracy = 0.0;  // validation accuracy of the first classifier, mean over folds
  double test_accuracy = 0.0;  // held-out accuracy of the first classifier, mean over folds
  std::optional<double> adversary_accuracy;
  std::optional<double> nuisance_accuracy;

  bool operator==(const SweepCell&) const = default;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  double selected_adversary = 0.0;
  double selected_nuisance = 0.0;
};

namespace detail {

/// Lexicographic choice within one stage; returns the chosen cell's index into `cells`.
inline std::size_t select_in_stage(std::span<const SweepCell> cells, std::span<const std::size_t> candidates,
                                   double tolerance, bool prefer_high_nuisance) {
  double best = -std::numeric_limits<double>::infinity();
  for (auto i : candidates) best = std::max(best, cells[i].task_accuracy);
  const auto reading = [&](const SweepCell& c) {
    // Higher is better in both stages after the sign flip.
    const auto& v = prefer_high_nuisance ? c.nuisance_accuracy : c.adversary_accuracy;
    if (!v) return -std::numeric_limits<double>::infinity();
    return prefer_high_nuisance ? *v : -*v;
  };
  const auto lambda = [&](const SweepCell& c) {
    return prefer_high_nuisance ? c.lambda_nuisance : c.lambda_adversary;
  };
  std::optional<std::size_t> pick;
  for (auto i : candidates) {
    if (cells[i].task_accuracy < best - tolerance) continue;
    if (!pick) {
      pick = i;
      continue;
    }
    const double ri = reading(cells[i]);
    const double rp = reading(cells[*pick]);
    if (ri > rp || (ri == rp && lambda(cells[i]) < lambda(cells[*pick]))) pick = i;
  }
  return *pick;
}

}  // namespace detail

/// Stage 1 picks lambda_N among rows with lambda_A = 0 (task accuracy first, then higher
/// nuisance accuracy, then smaller lambda); stage 2 picks lambda_A among rows with that lambda_N
/// (task accuracy, then lower adversary accuracy, then smaller lambda).
inline std::pair<double, double> select_lambda(std::span<const SweepCell> cells, double tolerance = 0.005) {
  if (cells.empty()) throw ArgumentError("select_lambda: empty sweep table");
  std::vector<std::size_t> stage1;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].lambda_adversary == 0.0) stage1.push_back(i);
  }
  if (stage1.empty()) throw ArgumentError("select_lambda: no lambda_A = 0 rows for the first stage");
  const double lambda_n = cells[detail::select_in_stage(cells, stage1, tolerance, true)].lambda_nuisance;
  std::vector<std::size_t> stage2;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].lambda_nuisance == lambda_n) stage2.push_back(i);
  }
  const double lambda_a = cells[detail::select_in_stage(cells, stage2, tolerance, false)].lambda_adversary;
  return {lambda_a, lambda_n};
}

inline SweepCell cell_from_report(const EvalReport& r, int stage) {
  const std::string tag(kind_tag(r.config.classifiers.front()));
  SweepCell c;
  c.lambda_adversary = r.model.lambda_adversary;
  c.lambda_nuisance = r.model.lambda_nuisance;
  c.stage = stage;
  c.task_accuracy = *mean_of(r.folds, [&](const FoldResult& f) { return std::optional(f.validation_accuracy.at(tag)); });
  c.test_accuracy = *mean_of(r.folds, [&](const FoldResult& f) { return std::optional(f.test_accuracy.at(tag)); });
  c.adversary_accuracy = mean_of(r.folds, [](const FoldResult& f) { return f.adversary_accuracy; });
  c.nuisance_accuracy = mean_of(r.folds, [](const FoldResult& f) { return f.nuisance_accuracy; });
  return c;
}

/// Two-stage sweep over the configured grids with cfg.model's variant. The stage-2 cell
/// (0, lambda_N*) is the stage-1 cell, not a re-run.
inline SweepResult sweep_lambda(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  const auto has_zero = [](const std::vector<double>& g) { return std::find(g.begin(), g.end(), 0.0) != g.end(); };
  if (!has_zero(cfg.lambda_adversary_grid) || !has_zero(cfg.lambda_nuisance_grid)) {
    throw ConfigError("both lambda grids must contain 0");
  }
  SweepResult out;
  for (double ln : cfg.lambda_nuisance_grid) {
    const ModelSpec m{cfg.model.variant, 0.0, ln};
    out.cells.push_back(cell_from_report(run_loso(cfg, m, cfg.latent_dim, cfg.data_fraction, progress), 1));
  }
  std::vector<SweepCell> stage1 = out.cells;
  out.selected_nuisance = select_lambda(stage1, cfg.tie_tolerance).second;
  for (double la : cfg.lambda_adversary_grid) {
    if (la == 0.0) continue;
    const ModelSpec m{cfg.model.variant, la, out.selected_nuisance};
    out.cells.push_back(cell_from_report(run_loso(cfg, m, cfg.latent_dim, cfg.data_fraction, progress), 2));
  }
  const auto sel = select_lambda(out.cells, cfg.tie_tolerance);
  out.selected_adversary = sel.first;
  out.selected_nuisance = sel.second;
  return out;
}

// Ablations ----------------------------------------------------------------------------------

/// One curve point: mean held-out accuracy of the first classifier for one model and seed.
struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
  std::string model;
  std::uint64_t seed = 0;

  bool operator==(const CurvePoint&) const = default;
};

struct AblationResult {
  std::vector<CurvePoint> points;
  std::vector<EvalReport> reports;
};

namespace detail {

inline void append_points(const EvalReport& r, double x, std::vector<CurvePoint>& out) {
  const std::string tag(kind_tag(r.config.classifiers.front()));
  for (auto seed : r.config.seeds) {
    std::vector<FoldResult> mine;
    for (const auto& f : r.folds) {
      if (f.seed == seed) mine.push_back(f);
    }
    const auto m = mean_of(mine, [&](const FoldResult& f) { return std::optional(f.test_accuracy.at(tag)); });
    out.push_back({x, *m, r.model.label(), seed});
  }
}

}  // namespace detail

/// run_loso per latent width for cfg.model and the AE baseline under identical seeds.
inline AblationResult dimension_sweep(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  AblationResult out;
  const ModelSpec baseline{VariantTag::AE, 0.0, 0.0};
  for (std::size_t d : cfg.dim_grid) {
    for (const ModelSpec& m : {cfg.model, baseline}) {
      out.reports.push_back(run_loso(cfg, m, d, cfg.data_fraction, progress));
      detail::append_points(out.reports.back(), static_cast<double>(d), out.points);
    }
  }
  return out;
}

/// run_loso per training-data fraction for every model in cfg.compare.
inline AblationResult datasize_ablation(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  AblationResult out;
  for (double f : cfg.fractions) {
    for (const ModelSpec& m : cfg.compare) {
      out.reports.push_back(run_loso(cfg, m, cfg.latent_dim, f, progress));
      detail::append_points(out.reports.back(), f, out.points);
    }
  }
  return out;
}

/// Mean of curve values per (x, model) over seeds.
inline std::map<std::pair<double, std::string>, double> curve_means(std::span<const CurvePoint> pts) {
  std::map<std::pair<double, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& p : pts) {
    auto& [s, n] = acc[{p.x, p.model}];
    s += p.value;
    ++n;
  }
  std::map<std::pair<double, std::string>, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
  return out;
}

}  // namespace rae
