#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rae/errors.hpp"
#include "rae/harness.hpp"

namespace rae {

// INI layout:
//   [data]        source = synth | <csv path>, plus the generator parameters
//   [model]       variant, lambda_a, lambda_n, latent_dim, alpha, ratio_adversary, ratio_nuisance
//   [train]       epochs, batch_size, optimizer, learning_rate, beta1, beta2, epsilon
//   [classifier]  kinds and per-kind hyperparameters
//   [experiment]  seeds, max_folds, jobs, data_fraction, fractions, compare
//   [sweep]       lambda_a_grid, lambda_n_grid, tie_tolerance, dim_grid

namespace config_detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] != '-') v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

/// Reads keys from one section and remembers which were consumed so leftovers can be reported.
class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    const auto v = tree_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    return v ? std::optional<std::string>(*v) : std::nullopt;
  }
  void real(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_real(qualified(key), *v);
  }
  template <class T>
  void count(const std::string& key, T& out) {
    if (auto v = raw(key)) out = static_cast<T>(parse_count(qualified(key), *v));
  }
  void reals(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& s : split_list(*v)) out.push_back(parse_real(qualified(key), s));
    }
  }
  template <class T>
  void counts(const std::string& key, std::vector<T>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& s : split_list(*v)) out.push_back(static_cast<T>(parse_count(qualified(key), s)));
    }
  }
  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + qualified(key) + "'");
    }
  }
  std::string qualified(const std::string& key) const { return name_ + "." + key; }

 private:
  const boost::property_tree::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

inline std::string format_model_spec(const ModelSpec& m) {
  return std::string(to_string(m.variant)) + ":" + format_real(m.lambda_adversary) + ":" +
         format_real(m.lambda_nuisance);
}

inline ModelSpec parse_model_spec(const std::string& s) {
  const auto parts = split_list(s, ':');
  if (parts.empty() || parts.size() == 2 || parts.size() > 3) {
    throw ConfigError("experiment.compare: expected VARIANT or VARIANT:lambda_a:lambda_n, got '" + s + "'");
  }
  ModelSpec m{parse_variant(parts[0]), 0.0, 0.0};
  if (parts.size() == 3) {
    m.lambda_adversary = parse_real("experiment.compare", parts[1]);
    m.lambda_nuisance = parse_real("experiment.compare", parts[2]);
  }
  return m;
}

}  // namespace config_detail

/// Overlays the INI content on the defaults. Unknown sections or keys are errors.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  namespace pt = boost::property_tree;
  using config_detail::Section;
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const std::set<std::string> known{"data", "model", "train", "classifier", "experiment", "sweep"};
  for (const auto& [name, child] : root) {
    if (!known.count(name)) throw ConfigError("unknown config section '" + name + "'");
  }
  const auto section = [&](const char* name) {
    const auto it = root.find(name);
    return Section(it == root.not_found() ? nullptr : &it->second, name);
  };

  Section data = section("data");
  if (auto v = data.raw("source")) {
    if (*v == "synth") {
      cfg.data.csv_path.reset();
    } else {
      cfg.data.csv_path = *v;
    }
  }
  data.count("subjects", cfg.data.synth.subjects);
  data.count("classes", cfg.data.synth.classes);
  data.count("channels", cfg.data.synth.channels);
  data.count("samples_per_cell", cfg.data.synth.samples_per_cell);
  data.real("sigma_task", cfg.data.synth.sigma_task);
  data.real("sigma_subject", cfg.data.synth.sigma_subject);
  data.real("sigma_noise", cfg.data.synth.sigma_noise);
  data.reject_unknown();

  Section model = section("model");
  if (auto v = model.raw("variant")) cfg.model.variant = parse_variant(*v);
  model.real("lambda_a", cfg.model.lambda_adversary);
  model.real("lambda_n", cfg.model.lambda_nuisance);
  model.count("latent_dim", cfg.latent_dim);
  model.real("alpha", cfg.alpha);
  model.count("ratio_adversary", cfg.ratio_adversary);
  model.count("ratio_nuisance", cfg.ratio_nuisance);
  model.reject_unknown();

  Section train = section("train");
  train.count("epochs", cfg.train.epochs);
  train.count("batch_size", cfg.train.batch_size);
  if (auto v = train.raw("optimizer")) cfg.train.optimizer.kind = parse_optimizer_kind(*v);
  train.real("learning_rate", cfg.train.optimizer.learning_rate);
  train.real("beta1", cfg.train.optimizer.beta1);
  train.real("beta2", cfg.train.optimizer.beta2);
  train.real("epsilon", cfg.train.optimizer.epsilon);
  train.count("log_every", cfg.train.log_every);
  train.reject_unknown();

  Section cls = section("classifier");
  MlpParams mlp;
  KnnParams knn;
  TreeParams tree;
  LdaParams lda;
  LogRegParams logreg;
  for (const auto& k : cfg.classifiers) {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, MlpParams>) mlp = p;
          else if constexpr (std::is_same_v<P, KnnParams>) knn = p;
          else if constexpr (std::is_same_v<P, TreeParams>) tree = p;
          else if constexpr (std::is_same_v<P, LdaParams>) lda = p;
          else logreg = p;
        },
        k);
  }
  cls.count("mlp_epochs", mlp.epochs);
  cls.count("mlp_batch_size", mlp.batch_size);
  cls.count("mlp_hidden", mlp.hidden);
  if (auto v = cls.raw("mlp_optimizer")) mlp.optimizer.kind = parse_optimizer_kind(*v);
  cls.real("mlp_learning_rate", mlp.optimizer.learning_rate);
  cls.count("knn_k", knn.k);
  cls.count("tree_max_depth", tree.max_depth);
  cls.count("tree_min_leaf", tree.min_leaf);
  cls.real("lda_shrinkage", lda.shrinkage);
  cls.real("logreg_l2", logreg.l2);
  cls.count("logreg_iterations", logreg.iterations);
  cls.real("logreg_step", logreg.step);
  std::vector<std::string> tags;
  if (auto v = cls.raw("kinds")) {
    tags = config_detail::split_list(*v);
  } else {
    for (const auto& k : cfg.classifiers) tags.emplace_back(kind_tag(k));
  }
  cfg.classifiers.clear();
  for (const auto& t : tags) {
    ClassifierKind k = parse_classifier_kind(t);
    switch (k.index()) {
      case 0: k = mlp; break;
      case 1: k = knn; break;
      case 2: k = tree; break;
      case 3: k = lda; break;
      default: k = logreg; break;
    }
    cfg.classifiers.push_back(k);
  }
  cls.reject_unknown();

  Section exp = section("experiment");
  exp.counts("seeds", cfg.seeds);
  exp.count("max_folds", cfg.max_folds);
  exp.count("jobs", cfg.jobs);
  exp.real("data_fraction", cfg.data_fraction);
  exp.reals("fractions", cfg.fractions);
  if (auto v = exp.raw("compare")) {
    cfg.compare.clear();
    for (const auto& s : config_detail::split_list(*v)) cfg.compare.push_back(config_detail::parse_model_spec(s));
  }
  exp.reject_unknown();

  Section sweep = section("sweep");
  sweep.reals("lambda_a_grid", cfg.lambda_adversary_grid);
  sweep.reals("lambda_n_grid", cfg.lambda_nuisance_grid);
  sweep.real("tie_tolerance", cfg.tie_tolerance);
  sweep.counts("dim_grid", cfg.dim_grid);
  sweep.reject_unknown();

  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig defaults = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return parse_config(in, std::move(defaults));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Every field is written, so the file alone reproduces the run.
inline void write_config(const ExperimentConfig& cfg, std::ostream& os) {
  using config_detail::format_real;
  using config_detail::join;
  const auto& s = cfg.data.synth;
  os << "[data]\n"
     << "source = " << (cfg.data.csv_path ? *cfg.data.csv_path : std::string("synth")) << "\n"
     << "subjects = " << s.subjects << "\n"
     << "classes = " << s.classes << "\n"
     << "channels = " << s.channels << "\n"
     << "samples_per_cell = " << s.samples_per_cell << "\n"
     << "sigma_task = " << format_real(s.sigma_task) << "\n"
     << "sigma_subject = " << format_real(s.sigma_subject) << "\n"
     << "sigma_noise = " << format_real(s.sigma_noise) << "\n\n";
  os << "[model]\n"
     << "variant = " << to_string(cfg.model.variant) << "\n"
     << "lambda_a = " << format_real(cfg.model.lambda_adversary) << "\n"
     << "lambda_n = " << format_real(cfg.model.lambda_nuisance) << "\n"
     << "latent_dim = " << cfg.latent_dim << "\n"
     << "alpha = " << format_real(cfg.alpha) << "\n"
     << "ratio_adversary = " << cfg.ratio_adversary << "\n"
     << "ratio_nuisance = " << cfg.ratio_nuisance << "\n\n";
  const auto& o = cfg.train.optimizer;
  os << "[train]\n"
     << "epochs = " << cfg.train.epochs << "\n"
     << "batch_size = " << cfg.train.batch_size << "\n"
     << "optimizer = " << to_string(o.kind) << "\n"
     << "learning_rate = " << format_real(o.learning_rate) << "\n"
     << "beta1 = " << format_real(o.beta1) << "\n"
     << "beta2 = " << format_real(o.beta2) << "\n"
     << "epsilon = " << format_real(o.epsilon) << "\n"
     << "log_every = " << cfg.train.log_every << "\n\n";

  MlpParams mlp;
  KnnParams knn;
  TreeParams tree;
  LdaParams lda;
  LogRegParams logreg;
  std::vector<std::string> tags;
  for (const auto& k : cfg.classifiers) {
    tags.emplace_back(kind_tag(k));
    if (const auto* p = std::get_if<MlpParams>(&k)) mlp = *p;
    if (const auto* p = std::get_if<KnnParams>(&k)) knn = *p;
    if (const auto* p = std::get_if<TreeParams>(&k)) tree = *p;
    if (const auto* p = std::get_if<LdaParams>(&k)) lda = *p;
    if (const auto* p = std::get_if<LogRegParams>(&k)) logreg = *p;
  }
  std::string kinds;
  for (std::size_t i = 0; i < tags.size(); ++i) kinds += (i ? "," : "") + tags[i];
  os << "[classifier]\n"
     << "kinds = " << kinds << "\n"
     << "mlp_epochs = " << mlp.epochs << "\n"
     << "mlp_batch_size = " << mlp.batch_size << "\n"
     << "mlp_hidden = " << mlp.hidden << "\n"
     << "mlp_optimizer = " << to_string(mlp.optimizer.kind) << "\n"
     << "mlp_learning_rate = " << format_real(mlp.optimizer.learning_rate) << "\n"
     << "knn_k = " << knn.k << "\n"
     << "tree_max_depth = " << tree.max_depth << "\n"
     << "tree_min_leaf = " << tree.min_leaf << "\n"
     << "lda_shrinkage = " << format_real(lda.shrinkage) << "\n"
     << "logreg_l2 = " << format_real(logreg.l2) << "\n"
     << "logreg_iterations = " << logreg.iterations << "\n"
     << "logreg_step = " << format_real(logreg.step) << "\n\n";

  std::string compare;
  for (std::size_t i = 0; i < cfg.compare.size(); ++i) {
    compare += (i ? "," : "") + config_detail::format_model_spec(cfg.compare[i]);
  }
  os << "[experiment]\n"
     << "seeds = " << join(cfg.seeds) << "\n"
     << "max_folds = " << cfg.max_folds << "\n"
     << "jobs = " << cfg.jobs << "\n"
     << "data_fraction = " << format_real(cfg.data_fraction) << "\n"
     << "fractions = " << join(cfg.fractions) << "\n"
     << "compare = " << compare << "\n\n";
  os << "[sweep]\n"
     << "lambda_a_grid = " << join(cfg.lambda_adversary_grid) << "\n"
     << "lambda_n_grid = " << join(cfg.lambda_nuisance_grid) << "\n"
     << "tie_tolerance = " << format_real(cfg.tie_tolerance) << "\n"
     << "dim_grid = " << join(cfg.dim_grid) << "\n";
}

inline void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  write_config(cfg, os);
  if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace rae
