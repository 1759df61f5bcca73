// Command-line driver: rae <verb> [flags]
//
//   synth      write the synthetic table as a CSV in the contract format
//   loso       leave-one-subject-out evaluation of one model
//   sweep      two-stage lambda sweep and selection
//   dimsweep   accuracy vs latent width, configured model against AE
//   datasize   accuracy vs training-data fraction for the compare list
//   gradcheck  finite-difference check of every layer, loss and composite objective
//   report     print the summaries of an emitted report
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rae/rae.hpp"

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::string out = "out";
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> jobs;
  std::optional<std::string> variant;
  std::optional<double> lambda_a;
  std::optional<double> lambda_n;
  std::optional<std::size_t> dim;
  std::optional<double> alpha;
  std::optional<double> fraction;
  std::vector<std::string> classifiers;
  std::optional<std::string> data;
  double tol = 1e-5;
  std::string report_path;
};

rae::ExperimentConfig resolve(const Overrides& o) {
  rae::ExperimentConfig cfg;
  cfg.jobs = rae::default_jobs();
  if (!o.config.empty()) cfg = rae::load_config(o.config, cfg);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.variant) cfg.model.variant = rae::parse_variant(*o.variant);
  if (o.lambda_a) cfg.model.lambda_adversary = *o.lambda_a;
  if (o.lambda_n) cfg.model.lambda_nuisance = *o.lambda_n;
  if (o.dim) cfg.latent_dim = *o.dim;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.fraction) cfg.data_fraction = *o.fraction;
  if (!o.classifiers.empty()) {
    cfg.classifiers.clear();
    for (const auto& t : o.classifiers) cfg.classifiers.push_back(rae::parse_classifier_kind(t));
  }
  if (o.data) {
    if (*o.data == "synth") {
      cfg.data.csv_path.reset();
    } else {
      cfg.data.csv_path = *o.data;
    }
  }
  cfg.validate();
  return cfg;
}

void print_summaries(const rae::EvalReport& r) {
  std::printf("%s  D=%zu  fraction=%g  lambda_A=%g  lambda_N=%g  folds=%zu\n", r.model.label().c_str(),
              r.latent_dim, r.data_fraction, r.model.lambda_adversary, r.model.lambda_nuisance, r.folds.size());
  for (const auto& [tag, s] : r.summaries) {
    std::printf("  %-7s mean %.4f  median %.4f  q1 %.4f  q3 %.4f  min %.4f  max %.4f\n", tag.c_str(), s.mean, s.median,
                s.first_quartile, s.third_quartile, s.min, s.max);
  }
}

void progress(const std::string& line) {
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
}

int run_gradcheck(double tol) {
  bool ok = true;
  std::printf("%-28s %6s %12s  %s\n", "check", "params", "max rel err", "result");
  for (const auto& c : rae::gradient_suite(tol)) {
    ok = ok && c.report.passed;
    std::printf("%-28s %6zu %12.3e  %s\n", c.name.c_str(), c.parameters, c.report.max_relative_error,
                c.report.passed ? "pass" : "FAIL");
  }
  return ok ? 0 : 1;
}

int dispatch(const std::string& verb, const Overrides& o) {
  if (verb == "gradcheck") return run_gradcheck(o.tol);
  if (verb == "report") {
    const rae::EvalReport r = rae::read_report(o.report_path.empty() ? o.out : o.report_path);
    print_summaries(r);
    return 0;
  }

  rae::ExperimentConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const rae::ConfigError& e) {
    std::fprintf(stderr, "rae: %s\n", e.what());
    return 2;
  }
  const fs::path out(o.out);
  fs::create_directories(out);
  rae::save_config(cfg, (out / "config.ini").string());

  if (verb == "synth") {
    const auto seed = cfg.seeds.front();
    const rae::SampleTable t = rae::synth_generate(cfg.data.synth, seed);
    const fs::path p = out / "synth.csv";
    std::ofstream os(p);
    if (!os) throw rae::IoError("cannot write '" + p.string() + "'");
    rae::write_csv(t, os);
    std::printf("wrote %zu rows to %s\n", t.size(), p.string().c_str());
  } else if (verb == "loso") {
    const rae::EvalReport r = rae::run_loso(cfg, progress);
    rae::emit_report(r, out);
    print_summaries(r);
  } else if (verb == "sweep") {
    const rae::SweepResult s = rae::sweep_lambda(cfg, progress);
    rae::emit_sweep(s, cfg, out);
    std::printf("stage  lambda_A  lambda_N  task_acc  adv_acc  nui_acc\n");
    for (const auto& c : s.cells) {
      std::printf("%5d  %8g  %8g  %8.4f  %7.4f  %7.4f\n", c.stage, c.lambda_adversary, c.lambda_nuisance,
                  c.task_accuracy, c.adversary_accuracy.value_or(NAN), c.nuisance_accuracy.value_or(NAN));
    }
    std::printf("selected lambda_A=%g lambda_N=%g\n", s.selected_adversary, s.selected_nuisance);
  } else if (verb == "dimsweep" || verb == "datasize") {
    const bool dims = verb == "dimsweep";
    const rae::AblationResult a = dims ? rae::dimension_sweep(cfg, progress) : rae::datasize_ablation(cfg, progress);
    rae::emit_ablation(a, cfg, dims ? "curve_dimension.csv" : "curve_datasize.csv", out);
    for (const auto& [k, v] : rae::curve_means(a.points)) {
      std::printf("%s=%g  %-8s %.4f\n", dims ? "D" : "fraction", k.first, k.second.c_str(), v);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rateless adversarial autoencoder experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "output directory");
  app.add_option("--seed", o.seeds, "seed list")->delimiter(',');
  app.add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--variant", o.variant, "model variant tag");
  app.add_option("--lambda-a", o.lambda_a, "adversary weight")->check(CLI::NonNegativeNumber);
  app.add_option("--lambda-n", o.lambda_n, "nuisance weight")->check(CLI::NonNegativeNumber);
  app.add_option("--dim", o.dim, "latent width D");
  app.add_option("--alpha", o.alpha, "soft schedule exponent");
  app.add_option("--fraction", o.fraction, "training data fraction");
  app.add_option("--classifier", o.classifiers, "classifier tags")->delimiter(',');
  app.add_option("--data", o.data, "CSV path or 'synth'");

  std::string verb;
  for (const char* name : {"synth", "loso", "sweep", "dimsweep", "datasize"}) {
    app.add_subcommand(name)->callback([&verb, name] { verb = name; });
  }
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad->add_option("--tol", o.tol, "relative error tolerance")->check(CLI::PositiveNumber);
  grad->callback([&verb] { verb = "gradcheck"; });
  auto* rep = app.add_subcommand("report", "print summaries of an emitted report");
  rep->add_option("path", o.report_path, "report directory or report.json");
  rep->callback([&verb] { verb = "report"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return dispatch(verb, o);
  } catch (const rae::ConfigError& e) {
    std::fprintf(stderr, "rae: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rae: %s\n", e.what());
    return 1;
  }
}
