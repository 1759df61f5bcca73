#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rae/config.hpp"
#include "rae/errors.hpp"
#include "rae/harness.hpp"

namespace rae {

inline constexpr int kReportSchemaVersion = 1;

namespace report_detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"q1", s.first_quartile}, {"q3", s.third_quartile},
          {"min", s.min},   {"max", s.max},       {"count", s.count}};
}

inline Summary summary_from(const json& j) {
  Summary s;
  s.mean = j.at("mean").get<double>();
  s.median = j.at("median").get<double>();
  s.first_quartile = j.at("q1").get<double>();
  s.third_quartile = j.at("q3").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.count = j.at("count").get<std::size_t>();
  return s;
}

inline json log_json(const TrainLog& log) {
  json rows = json::array();
  for (const auto& e : log.epochs) {
    rows.push_back({e.epoch, e.total, e.reconstruction, opt(e.adversary_ce), opt(e.nuisance_ce),
                    opt(e.adversary_accuracy), opt(e.nuisance_accuracy)});
  }
  return rows;
}

inline TrainLog log_from(const json& j) {
  TrainLog log;
  for (const auto& r : j) {
    EpochRecord e;
    e.epoch = r.at(0).get<std::size_t>();
    e.total = r.at(1).get<double>();
    e.reconstruction = r.at(2).get<double>();
    e.adversary_ce = opt_from(r.at(3));
    e.nuisance_ce = opt_from(r.at(4));
    e.adversary_accuracy = opt_from(r.at(5));
    e.nuisance_accuracy = opt_from(r.at(6));
    log.epochs.push_back(e);
  }
  return log;
}

inline std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string opt_csv(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

inline std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string trainlog_name(const FoldResult& f) {
  return "trainlogs/seed" + std::to_string(f.seed) + "_subject" + std::to_string(f.subject) + ".csv";
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
  }

  std::ofstream open(const std::string& rel) {
    const fs::path p = dir_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream os(p);
    if (ec || !os) throw IoError("cannot write '" + p.string() + "'");
    manifest_.push_back(rel);
    return os;
  }

  void text(const std::string& rel, const std::string& body) {
    auto os = open(rel);
    os << body;
    if (!os) throw IoError("write failed for '" + (dir_ / rel).string() + "'");
  }

  const std::vector<std::string>& manifest() const { return manifest_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> manifest_;
};

inline std::string curve_csv(std::span<const CurvePoint> pts) {
  std::ostringstream os;
  os << "x,value,model,seed\n";
  for (const auto& p : pts) os << real(p.x) << ',' << real(p.value) << ',' << p.model << ',' << p.seed << '\n';
  return os.str();
}

}  // namespace report_detail

/// Per-fold accuracy per held-out subject (box-plot data) and mean total loss per epoch.
inline std::vector<CurvePoint> subject_curve(const EvalReport& r) {
  std::vector<CurvePoint> out;
  const std::string tag(kind_tag(r.config.classifiers.front()));
  for (const auto& f : r.folds) {
    out.push_back({static_cast<double>(f.subject), f.test_accuracy.at(tag), r.model.label(), f.seed});
  }
  return out;
}

inline std::vector<CurvePoint> convergence_curve(const EvalReport& r, bool nuisance_ce = false) {
  std::map<std::pair<std::uint64_t, std::size_t>, std::pair<double, std::size_t>> acc;
  for (const auto& f : r.folds) {
    for (const auto& e : f.log.epochs) {
      const std::optional<double> v = nuisance_ce ? e.nuisance_ce : std::optional<double>(e.total);
      if (!v) continue;
      auto& [s, n] = acc[{f.seed, e.epoch}];
      s += *v;
      ++n;
    }
  }
  std::vector<CurvePoint> out;
  for (const auto& [k, v] : acc) {
    out.push_back({static_cast<double>(k.second), v.first / static_cast<double>(v.second), r.model.label(), k.first});
  }
  return out;
}

inline std::string folds_csv(const EvalReport& r) {
  using report_detail::opt_csv;
  using report_detail::real;
  std::vector<std::string> tags;
  for (const auto& k : r.config.classifiers) tags.emplace_back(kind_tag(k));
  std::ostringstream os;
  os << "subject,seed,split_hash";
  for (const auto& t : tags) os << ',' << t << "_test," << t << "_val";
  os << ",adv_acc,nui_acc,trainlog\n";
  for (const auto& f : r.folds) {
    os << f.subject << ',' << f.seed << ',' << report_detail::hex(f.split_hash);
    for (const auto& t : tags) os << ',' << real(f.test_accuracy.at(t)) << ',' << real(f.validation_accuracy.at(t));
    os << ',' << opt_csv(f.adversary_accuracy) << ',' << opt_csv(f.nuisance_accuracy) << ','
       << report_detail::trainlog_name(f) << '\n';
  }
  return os.str();
}

inline nlohmann::json report_json(const EvalReport& r, const std::vector<std::string>& manifest = {}) {
  using nlohmann::json;
  using namespace report_detail;
  std::ostringstream ini;
  write_config(r.config, ini);
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"subject", f.subject},
                     {"seed", f.seed},
                     {"split_hash", hex(f.split_hash)},
                     {"test_accuracy", f.test_accuracy},
                     {"validation_accuracy", f.validation_accuracy},
                     {"adversary_accuracy", opt(f.adversary_accuracy)},
                     {"nuisance_accuracy", opt(f.nuisance_accuracy)},
                     {"trainlog", trainlog_name(f)},
                     {"epochs", log_json(f.log)}});
  }
  json summaries = json::object();
  for (const auto& [tag, s] : r.summaries) summaries[tag] = summary_json(s);
  return {{"schema_version", kReportSchemaVersion},
          {"artifact_version", std::string(kArtifactVersion)},
          {"config", ini.str()},
          {"model", {{"variant", to_string(r.model.variant)},
                     {"lambda_a", r.model.lambda_adversary},
                     {"lambda_n", r.model.lambda_nuisance}}},
          {"latent_dim", r.latent_dim},
          {"data_fraction", r.data_fraction},
          {"seeds", r.config.seeds},
          {"folds", folds},
          {"summaries", summaries},
          {"manifest", manifest}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  using namespace report_detail;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kReportSchemaVersion) {
      throw IoError("unsupported report schema version " + std::to_string(version));
    }
    EvalReport r;
    std::istringstream ini(j.at("config").get<std::string>());
    r.config = parse_config(ini);
    const auto& m = j.at("model");
    r.model = {parse_variant(m.at("variant").get<std::string>()), m.at("lambda_a").get<double>(),
               m.at("lambda_n").get<double>()};
    r.latent_dim = j.at("latent_dim").get<std::size_t>();
    r.data_fraction = j.at("data_fraction").get<double>();
    for (const auto& fj : j.at("folds")) {
      FoldResult f;
      f.subject = fj.at("subject").get<int>();
      f.seed = fj.at("seed").get<std::uint64_t>();
      f.split_hash = std::stoull(fj.at("split_hash").get<std::string>(), nullptr, 16);
      f.test_accuracy = fj.at("test_accuracy").get<std::map<std::string, double>>();
      f.validation_accuracy = fj.at("validation_accuracy").get<std::map<std::string, double>>();
      f.adversary_accuracy = opt_from(fj.at("adversary_accuracy"));
      f.nuisance_accuracy = opt_from(fj.at("nuisance_accuracy"));
      f.log = log_from(fj.at("epochs"));
      r.folds.push_back(std::move(f));
    }
    for (const auto& [tag, s] : j.at("summaries").items()) r.summaries[tag] = summary_from(s);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

/// report.json, folds.csv, one TrainLog CSV per fold and the curve CSVs. Returns the manifest.
inline std::vector<std::string> emit_report(const EvalReport& r, const std::filesystem::path& dir) {
  using namespace report_detail;
  Writer w(dir);
  w.text("folds.csv", folds_csv(r));
  for (const auto& f : r.folds) {
    auto os = w.open(trainlog_name(f));
    write_train_log_csv(f.log, os);
  }
  w.text("curve_subject_accuracy.csv", curve_csv(subject_curve(r)));
  w.text("curve_convergence.csv", curve_csv(convergence_curve(r)));
  w.text("curve_nuisance_ce.csv", curve_csv(convergence_curve(r, true)));
  auto manifest = w.manifest();
  manifest.push_back("report.json");
  w.text("report.json", report_json(r, manifest).dump(2) + "\n");
  return manifest;
}

inline EvalReport read_report(const std::filesystem::path& dir_or_file) {
  namespace fs = std::filesystem;
  const fs::path p = fs::is_directory(dir_or_file) ? dir_or_file / "report.json" : dir_or_file;
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
  return report_from_json(j);
}

inline std::string sweep_csv(const SweepResult& s) {
  using report_detail::opt_csv;
  using report_detail::real;
  std::ostringstream os;
  os << "stage,lambda_a,lambda_n,task_acc,test_acc,adv_acc,nui_acc\n";
  for (const auto& c : s.cells) {
    os << c.stage << ',' << real(c.lambda_adversary) << ',' << real(c.lambda_nuisance) << ',' << real(c.task_accuracy)
       << ',' << real(c.test_accuracy) << ',' << opt_csv(c.adversary_accuracy) << ',' << opt_csv(c.nuisance_accuracy)
       << '\n';
  }
  return os.str();
}

inline std::vector<std::string> emit_sweep(const SweepResult& s, const ExperimentConfig& cfg,
                                           const std::filesystem::path& dir) {
  using namespace report_detail;
  Writer w(dir);
  w.text("sweep.csv", sweep_csv(s));
  std::vector<CurvePoint> adv, nui;
  for (const auto& c : s.cells) {
    if (c.adversary_accuracy && c.stage == 2) adv.push_back({c.lambda_adversary, *c.adversary_accuracy, "adversary", 0});
    if (c.nuisance_accuracy && c.stage == 1) nui.push_back({c.lambda_nuisance, *c.nuisance_accuracy, "nuisance", 0});
  }
  w.text("curve_lambda_adversary.csv", curve_csv(adv));
  w.text("curve_lambda_nuisance.csv", curve_csv(nui));
  std::ostringstream ini;
  write_config(cfg, ini);
  json cells = json::array();
  for (const auto& c : s.cells) {
    cells.push_back({{"stage", c.stage},
                     {"lambda_a", c.lambda_adversary},
                     {"lambda_n", c.lambda_nuisance},
                     {"task_accuracy", c.task_accuracy},
                     {"test_accuracy", c.test_accuracy},
                     {"adversary_accuracy", opt(c.adversary_accuracy)},
                     {"nuisance_accuracy", opt(c.nuisance_accuracy)}});
  }
  auto manifest = w.manifest();
  manifest.push_back("sweep.json");
  const json j{{"schema_version", kReportSchemaVersion},
               {"artifact_version", std::string(kArtifactVersion)},
               {"config", ini.str()},
               {"cells", cells},
               {"selected", {{"lambda_a", s.selected_adversary}, {"lambda_n", s.selected_nuisance}}},
               {"manifest", manifest}};
  w.text("sweep.json", j.dump(2) + "\n");
  return manifest;
}

/// Curve CSV plus one full report per run under runs/.
inline std::vector<std::string> emit_ablation(const AblationResult& a, const ExperimentConfig& cfg,
                                              const std::string& curve_name, const std::filesystem::path& dir) {
  using namespace report_detail;
  Writer w(dir);
  w.text(curve_name, curve_csv(a.points));
  json runs = json::array();
  for (const auto& r : a.reports) {
    const std::string sub = "runs/" + r.model.label() + "_D" + std::to_string(r.latent_dim) + "_f" +
                            real(r.data_fraction);
    emit_report(r, dir / sub);
    runs.push_back(sub);
  }
  std::ostringstream ini;
  write_config(cfg, ini);
  json means = json::array();
  for (const auto& [k, v] : curve_means(a.points)) means.push_back({{"x", k.first}, {"model", k.second}, {"mean", v}});
  auto manifest = w.manifest();
  manifest.push_back("ablation.json");
  const json j{{"schema_version", kReportSchemaVersion},
               {"artifact_version", std::string(kArtifactVersion)},
               {"config", ini.str()},
               {"means", means},
               {"runs", runs},
               {"manifest", manifest}};
  w.text("ablation.json", j.dump(2) + "\n");
  return manifest;
}

}  // namespace rae
