// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance                     run every criterion
//   acceptance NAME [NAME...]      run the named criteria
//   acceptance --report-only NAME  print the verdict but exit 0 unless the check itself errors
//
// Exit status: 0 when every verdict is PASS (or --report-only), 1 on a FAIL verdict, 2 on an
// error or unknown criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rae/rae.hpp"

using namespace rae;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit = 0.0;  // seconds; 0 means none
  std::function<Verdict()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig synthetic_config(std::vector<std::uint64_t> seeds) {
  ExperimentConfig c;
  c.seeds = std::move(seeds);
  c.jobs = default_jobs();
  return c;
}

TrainingSet synthetic_training_set(std::uint64_t seed) {
  const Dataset d = load_dataset(DataSource{}, seed);
  const FoldSpec f = loso_split(d.table, 1, seed);
  const NormalizedTable n = preprocess(d.table, f.train);
  return to_training_set(n.table, f.train);
}

// ------------------------------------------------------------------------------------------

Verdict gradient_integrity() {
  std::size_t checks = 0, largest = 0;
  double worst = 0.0;
  std::string failed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& c : gradient_suite(1e-5, seed)) {
      ++checks;
      largest = std::max(largest, c.parameters);
      worst = std::max(worst, c.report.max_relative_error);
      if (!c.report.passed && failed.empty()) failed = c.name + fmt(" (seed %llu)", static_cast<unsigned long long>(seed));
    }
  }
  const bool ok = failed.empty() && largest <= 500;
  return {ok, fmt("%zu checks over 5 seeds, max rel err %.2e, largest net %zu params", checks, worst, largest) +
                  (failed.empty() ? "" : ", first failure: " + failed)};
}

Verdict schedule_math() {
  const DropoutSchedule s = make_soft_schedule(15, 3.0);
  const bool midpoint = s.drop_adversary[7] == 0.125;
  const double eff = effective_dim(s, Head::adversary);
  const double want = 15.0 - 11025.0 / 2744.0;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(2, 64);
  std::uniform_real_distribution<double> alpha(0.05, 10.0);
  double worst_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const DropoutSchedule r = make_soft_schedule(dim(rng), alpha(rng));
    worst_sum = std::max(worst_sum, std::abs(effective_dim(r, Head::adversary) + effective_dim(r, Head::nuisance) -
                                             static_cast<double>(r.dim)));
  }
  const bool ok = midpoint && std::abs(eff - want) <= 1e-12 && worst_sum <= 1e-12;
  return {ok, fmt("p_a(8) = %.17g, eff_a = %.15f (|err| %.1e), worst |eff_a + eff_n - D| = %.1e", s.drop_adversary[7], eff,
                  std::abs(eff - want), worst_sum)};
}

Verdict reduction_equivalences() {
  const TrainingSet train = synthetic_training_set(7);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;

  // (a) step by step on a shared batch stream: the zero-weight adversarial model's encoder and
  // decoder must match cAE after every update, discriminator steps notwithstanding.
  bool steps_equal = true;
  std::size_t steps = 0;
  {
    ModelBundle adv = build_model(VariantTag::DA_cRAE, {}, {}, 13);
    ModelBundle cae = build_model(VariantTag::cAE, {}, {}, 13);
    PlayerOptimizers oa(cfg.optimizer), oc(cfg.optimizer);
    Rng order_rng(17), mask_rng(19);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < 2; ++epoch) {
      std::shuffle(order.begin(), order.end(), order_rng);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, order.size() - start);
        const TrainingSet batch = train.rows(std::span<const std::size_t>(order.data() + start, n));
        discriminator_step(adv, batch, sample_masks(*adv.schedule, n, mask_rng), oa);
        const MaskBatch m = sample_masks(*adv.schedule, n, mask_rng);
        const CompositeLoss la = encoder_decoder_step(adv, batch, &m, cfg, oa);
        const CompositeLoss lc = encoder_decoder_step(cae, batch, nullptr, cfg, oc);
        ++steps;
        steps_equal = steps_equal && la.reconstruction == lc.reconstruction &&
                      adv.encoder.same_parameters(cae.encoder) && adv.decoder.same_parameters(cae.decoder);
      }
    }
  }
  // (a) through the training loop, for every variant with heads.
  bool loop_equal = true;
  for (VariantTag t : kAllVariants) {
    if (t == VariantTag::AE || t == VariantTag::cAE) continue;
    ModelBundle adv = build_model(t, {}, {}, 23);
    ModelBundle cae = build_model(VariantTag::cAE, {}, {}, 23);
    const TrainLog a = train_feature_extractor(adv, train, TrainingSet{}, cfg);
    const TrainLog c = train_feature_extractor(cae, train, TrainingSet{}, cfg);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      loop_equal = loop_equal && a.epochs[e].total == c.epochs[e].total &&
                   a.epochs[e].reconstruction == c.epochs[e].reconstruction;
    }
    loop_equal = loop_equal && adv.encoder.same_parameters(cae.encoder) && adv.decoder.same_parameters(cae.decoder);
  }
  // (b) soft model on the matching hard schedule against the hard model, all parameters and logs.
  TrainConfig both = cfg;
  both.lambda_adversary = 0.5;
  both.lambda_nuisance = 0.05;
  ModelBundle soft = build_model(VariantTag::DA_cRAE, {}, {}, 29);
  soft.replace_schedule(make_hard_schedule(15, 2, 1));
  ModelBundle hard = build_model(VariantTag::DA_cAE, {}, {}, 29);
  const bool hard_equal = train_feature_extractor(soft, train, train, both) ==
                              train_feature_extractor(hard, train, train, both) &&
                          soft.encoder.same_parameters(hard.encoder) && soft.decoder.same_parameters(hard.decoder) &&
                          soft.adversary->same_parameters(*hard.adversary) &&
                          soft.nuisance->same_parameters(*hard.nuisance);
  return {steps_equal && loop_equal && hard_equal,
          fmt("(a) %zu shared steps %s, 6 variants x %zu epochs %s; (b) DA-cRAE on hard 10/5 split vs DA-cAE %s", steps,
              steps_equal ? "bitwise equal" : "DIFFER", cfg.epochs, loop_equal ? "bitwise equal" : "DIFFER",
              hard_equal ? "bitwise equal" : "DIFFER")};
}

Verdict chance_level() {
  // Fresh initialization per sample: output classes are exchangeable under the init, so each
  // trial is Bernoulli(1/S) and the binomial sigma applies.
  const Dataset d = load_dataset(DataSource{}, 31);
  std::vector<std::size_t> all(d.table.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const TrainingSet data = to_training_set(preprocess(d.table, all).table, all);
  const std::size_t n = std::min<std::size_t>(data.size(), 2400);
  double adv = 0.0, nui = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ModelBundle b = build_model(VariantTag::DA_cRAE, {}, {}, derive_seed(37, {i}));
    const TrainingSet one = data.rows(std::span<const std::size_t>(&i, 1));
    const DiscriminatorAccuracy acc = evaluate_discriminators(b, one);
    adv += *acc.adversary;
    nui += *acc.nuisance;
  }
  const double nn = static_cast<double>(n);
  adv /= nn;
  nui /= nn;
  const double band = 3.0 * std::sqrt(0.05 * 0.95 / nn);
  const bool ok = n >= 2000 && std::abs(adv - 0.05) <= band && std::abs(nui - 0.05) <= band;
  return {ok, fmt("n = %zu, adversary %.4f, nuisance %.4f, band 0.05 +- %.4f", n, adv, nui, band)};
}

Verdict synthetic_ordering() {
  const ExperimentConfig cfg = synthetic_config({0, 1, 2, 3, 4});
  const std::vector<ModelSpec> models{{VariantTag::DA_cRAE, 0.5, 0.05},
                                      {VariantTag::D_cRAE, 0.0, 0.05},
                                      {VariantTag::cAE, 0.0, 0.0},
                                      {VariantTag::AE, 0.0, 0.0}};
  std::vector<double> acc;
  std::string detail;
  for (const auto& m : models) {
    const EvalReport r = run_loso(cfg, m, cfg.latent_dim, 1.0);
    acc.push_back(r.summaries.at("mlp").mean);
    detail += fmt("%s %.4f, ", m.label().c_str(), acc.back());
  }
  const bool ordered = acc[0] >= acc[1] && acc[1] >= acc[2] && acc[2] >= acc[3];
  const double gap = acc[0] - acc[3];
  return {ordered && gap >= 0.05, detail + fmt("DA-cRAE - AE = %+.2f points", 100.0 * gap)};
}

Verdict lambda_directionality() {
  const ExperimentConfig cfg = synthetic_config({0, 1, 2});
  const SweepResult s = sweep_lambda(cfg);
  std::vector<double> ln, nui, la, adv;
  for (const auto& c : s.cells) {
    if (c.stage == 1) {
      ln.push_back(c.lambda_nuisance);
      nui.push_back(*c.nuisance_accuracy);
    }
    if (c.lambda_nuisance == s.selected_nuisance) {
      la.push_back(c.lambda_adversary);
      adv.push_back(*c.adversary_accuracy);
    }
  }
  const double rho_n = spearman(ln, nui);
  const double rho_a = spearman(la, adv);
  std::string cells;
  for (std::size_t i = 0; i < ln.size(); ++i) cells += fmt(" %g:%.3f", ln[i], nui[i]);
  cells += ";";
  for (std::size_t i = 0; i < la.size(); ++i) cells += fmt(" %g:%.3f", la[i], adv[i]);
  return {rho_n > 0.0 && rho_a < 0.0,
          fmt("Spearman(lambda_N, nuisance acc) = %+.3f, Spearman(lambda_A, adversary acc) = %+.3f at lambda_N* = %g;",
              rho_n, rho_a, s.selected_nuisance) +
              cells};
}

Verdict convergence() {
  const ExperimentConfig cfg = synthetic_config({0});
  const EvalReport r = run_loso(cfg, {VariantTag::DA_cRAE, 0.5, 0.05}, cfg.latent_dim, 1.0);
  const std::size_t epochs = cfg.train.epochs;
  std::vector<double> total(epochs, 0.0), nui(epochs, 0.0);
  for (const auto& f : r.folds) {
    for (std::size_t e = 0; e < epochs; ++e) {
      total[e] += f.log.epochs[e].total / static_cast<double>(r.folds.size());
      nui[e] += *f.log.epochs[e].nuisance_ce / static_cast<double>(r.folds.size());
    }
  }
  // The composite carries -lambda_A * CE_a and goes negative, so "at most half of epoch 1" is
  // also checked as a reduction by half the epoch-1 magnitude.
  const double l1 = total[0], l15 = total[14];
  const bool literal = l15 <= 0.5 * l1;
  const bool halved = l15 <= l1 - 0.5 * std::abs(l1);
  std::vector<double> windows;
  for (std::size_t w = 0; w + 5 <= epochs; w += 5) {
    windows.push_back(std::accumulate(nui.begin() + static_cast<std::ptrdiff_t>(w),
                                      nui.begin() + static_cast<std::ptrdiff_t>(w + 5), 0.0) / 5.0);
  }
  bool monotone = true;
  std::string ws;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (i > 0 && !(windows[i] < windows[i - 1])) monotone = false;
    ws += fmt(" %.4f", windows[i]);
  }
  return {literal && halved && monotone,
          fmt("fold-mean total L1 = %.4f, L15 = %.4f (L15 <= 0.5 L1: %s; halved magnitude: %s); nuisance CE per "
              "5-epoch window:",
              l1, l15, literal ? "yes" : "no", halved ? "yes" : "no") +
              ws + (monotone ? " (decreasing)" : " (not monotone)")};
}

Verdict classifier_oracles() {
  double knn = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) knn = std::min(knn, oracle::knn_agreement(seed));
  const double tree = oracle::tree_xor_accuracy();
  double lda = 1.0, logreg = 1.0;
  for (std::uint64_t seed : {4, 5, 6}) {
    lda = std::min(lda, oracle::separable_accuracy(LdaParams{}, seed));
    logreg = std::min(logreg, oracle::separable_accuracy(LogRegParams{}, seed));
  }
  bool det = true;
  for (const ClassifierKind& k : {ClassifierKind{MlpParams{}}, ClassifierKind{KnnParams{}}, ClassifierKind{TreeParams{}},
                                  ClassifierKind{LdaParams{}}, ClassifierKind{LogRegParams{}}}) {
    det = det && oracle::deterministic(k, 7);
  }
  return {knn == 1.0 && tree == 1.0 && lda >= 0.99 && logreg >= 0.99 && det,
          fmt("knn agreement %.3f, tree XOR %.3f, lda %.4f, logreg %.4f, deterministic: %s", knn, tree, lda, logreg,
              det ? "yes" : "no")};
}

Verdict select_lambda_replay() {
  const auto [la, ln] = select_lambda(oracle::reference_sweep());
  return {la == 0.5 && ln == 0.05, fmt("selected (lambda_A, lambda_N) = (%g, %g)", la, ln)};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"gradient_integrity", 30.0, gradient_integrity},
      {"schedule_math", 1.0, schedule_math},
      {"reduction_equivalences", 60.0, reduction_equivalences},
      {"chance_level", 0.0, chance_level},
      {"synthetic_ordering", 600.0, synthetic_ordering},
      {"lambda_directionality", 900.0, lambda_directionality},
      {"convergence", 0.0, convergence},
      {"classifier_oracles", 0.0, classifier_oracles},
      {"select_lambda_replay", 1.0, select_lambda_replay},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  bool report_only = false;
  std::vector<std::string> names;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report-only") {
      report_only = true;
    } else {
      names.push_back(a);
    }
  }
  std::vector<const Criterion*> todo;
  for (const auto& c : criteria()) {
    if (names.empty() || std::find(names.begin(), names.end(), c.name) != names.end()) todo.push_back(&c);
  }
  if (todo.size() != (names.empty() ? criteria().size() : names.size())) {
    std::fprintf(stderr, "unknown criterion; known:");
    for (const auto& c : criteria()) std::fprintf(stderr, " %s", c.name.c_str());
    std::fprintf(stderr, "\n");
    return 2;
  }

  int status = 0;
  for (const Criterion* c : todo) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c->run();
    } catch (const std::exception& e) {
      std::printf("FAIL %s: error: %s\n", c->name.c_str(), e.what());
      std::fflush(stdout);
      status = 2;
      continue;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c->time_limit == 0.0 || secs < c->time_limit;
    std::string timing = fmt("%.1f s", secs);
    if (c->time_limit > 0.0) timing += fmt(", limit %.0f s", c->time_limit);
    const bool pass = v.pass && in_time;
    std::printf("%s %s: %s (%s)\n", pass ? "PASS" : "FAIL", c->name.c_str(), v.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    if (!pass && !report_only && status == 0) status = 1;
  }
  return status;
}
