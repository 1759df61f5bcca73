#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rae/errors.hpp"
#include "rae/matrix.hpp"
#include "rae/random.hpp"

namespace rae {

inline constexpr std::array<std::string_view, 7> kChannelNames{
    "accel_x", "accel_y", "accel_z", "temp", "eda", "hr", "spo2"};

inline constexpr std::array<std::string_view, 4> kKeyColumns{"subject", "trial", "label", "t"};

// Label coding of the CSV contract.
inline constexpr int kLabelPhysical = 0;
inline constexpr int kLabelCognitive = 1;
inline constexpr int kLabelEmotional = 2;
inline constexpr int kLabelRelaxation = 3;
inline constexpr std::size_t kContractClasses = 4;
inline constexpr int kContractMaxSubject = 20;

/// One row per 1 Hz sample. Subjects are 1-based ids; labels are 0-based.
struct SampleTable {
  std::vector<int> subject;
  std::vector<int> trial;
  std::vector<int> label;
  std::vector<int> time;
  Matrix signals;  // n x C

  std::size_t size() const noexcept { return subject.size(); }
  std::size_t channels() const noexcept { return signals.cols(); }

  bool operator==(const SampleTable&) const = default;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stdev;
  bool operator==(const ChannelStats&) const = default;
};

struct DatasetMeta {
  std::size_t subjects = 0;  // S: largest subject id
  std::size_t classes = 0;   // L
  std::size_t channels = 0;  // C
  std::size_t samples = 0;   // n
  std::vector<std::size_t> class_counts;
  std::optional<ChannelStats> normalization;
};

struct LoadedDataset {
  SampleTable table;
  DatasetMeta meta;
};

inline std::string channel_name(std::size_t c, std::size_t channels) {
  return channels == kChannelNames.size() ? std::string(kChannelNames[c]) : "channel " + std::to_string(c);
}

inline DatasetMeta compute_meta(const SampleTable& t, std::optional<std::size_t> classes = std::nullopt) {
  DatasetMeta m;
  m.samples = t.size();
  m.channels = t.channels();
  int max_subject = 0;
  int max_label = -1;
  for (std::size_t i = 0; i < t.size(); ++i) {
    max_subject = std::max(max_subject, t.subject[i]);
    max_label = std::max(max_label, t.label[i]);
  }
  m.subjects = static_cast<std::size_t>(max_subject);
  m.classes = classes.value_or(static_cast<std::size_t>(max_label + 1));
  m.class_counts.assign(m.classes, 0);
  for (int y : t.label) ++m.class_counts.at(static_cast<std::size_t>(y));
  return m;
}

/// Distinct subject ids in ascending order.
inline std::vector<int> subject_ids(const SampleTable& t) {
  std::set<int> s(t.subject.begin(), t.subject.end());
  return {s.begin(), s.end()};
}

inline SampleTable select_rows(const SampleTable& t, std::span<const std::size_t> rows) {
  SampleTable out;
  out.signals = gather_rows(t.signals, rows);
  for (auto r : rows) {
    out.subject.push_back(t.subject[r]);
    out.trial.push_back(t.trial[r]);
    out.label.push_back(t.label[r]);
    out.time.push_back(t.time[r]);
  }
  return out;
}

// CSV contract -------------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline int parse_int_field(std::string_view f, std::string_view column, std::size_t row) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty()) {
    throw IngestionError("column '" + std::string(column) + "': '" + std::string(f) + "' is not an integer", row);
  }
  return v;
}

inline double parse_real_field(std::string_view f, std::string_view column, std::size_t row) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v)) {
    throw IngestionError("column '" + std::string(column) + "': '" + std::string(f) + "' is not a finite real",
                         row);
  }
  return v;
}

}  // namespace detail

/// Parses the `subject,trial,label,t,<7 channels>` contract. Row numbers in errors are file
/// line numbers (the header is line 1).
inline LoadedDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty input: header row required", 1);
  const auto header = detail::split_commas(line);
  std::vector<std::string_view> expected(kKeyColumns.begin(), kKeyColumns.end());
  expected.insert(expected.end(), kChannelNames.begin(), kChannelNames.end());
  std::vector<std::size_t> pos(expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const auto it = std::find(header.begin(), header.end(), expected[k]);
    if (it == header.end()) throw IngestionError("missing column '" + std::string(expected[k]) + "'", 1);
    pos[k] = static_cast<std::size_t>(it - header.begin());
  }

  SampleTable t;
  std::vector<double> values;
  std::set<std::tuple<int, int, int>> keys;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      throw IngestionError("expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(fields.size()),
                           row);
    }
    const int subject = detail::parse_int_field(fields[pos[0]], "subject", row);
    const int trial = detail::parse_int_field(fields[pos[1]], "trial", row);
    const int label = detail::parse_int_field(fields[pos[2]], "label", row);
    const int time = detail::parse_int_field(fields[pos[3]], "t", row);
    if (subject < 1 || subject > kContractMaxSubject) {
      throw IngestionError("subject " + std::to_string(subject) + " outside 1..20", row);
    }
    if (trial < 1) throw IngestionError("trial must be >= 1", row);
    if (label < 0 || label >= static_cast<int>(kContractClasses)) {
      throw IngestionError("label " + std::to_string(label) + " outside 0..3", row);
    }
    if (time < 0) throw IngestionError("t must be >= 0", row);
    if (!keys.emplace(subject, trial, time).second) {
      throw IngestionError("duplicate (subject, trial, t) = (" + std::to_string(subject) + ", " +
                               std::to_string(trial) + ", " + std::to_string(time) + ")",
                           row);
    }
    for (std::size_t c = 0; c < kChannelNames.size(); ++c) {
      values.push_back(detail::parse_real_field(fields[pos[4 + c]], kChannelNames[c], row));
    }
    t.subject.push_back(subject);
    t.trial.push_back(trial);
    t.label.push_back(label);
    t.time.push_back(time);
  }
  t.signals = Matrix(t.subject.size(), kChannelNames.size(), std::move(values));
  DatasetMeta meta = compute_meta(t, kContractClasses);
  return {std::move(t), std::move(meta)};
}

inline LoadedDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return read_csv(in);
  } catch (const IngestionError& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

inline void write_csv(const SampleTable& t, std::ostream& out) {
  if (t.channels() != kChannelNames.size()) {
    throw ArgumentError("the CSV contract has 7 channels; table has " + std::to_string(t.channels()));
  }
  out << "subject,trial,label,t";
  for (auto n : kChannelNames) out << ',' << n;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.subject[i] << ',' << t.trial[i] << ',' << t.label[i] << ',' << t.time[i];
    for (double v : t.signals.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

// Preprocessing ------------------------------------------------------------------------------

struct NormalizedTable {
  SampleTable table;
  ChannelStats stats;
};

/// Z-scores every channel with mean and population stdev of the `train` rows only.
inline NormalizedTable preprocess(const SampleTable& t, std::span<const std::size_t> train) {
  if (train.empty()) throw ArgumentError("preprocess: no training rows");
  const std::size_t c = t.channels();
  ChannelStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  for (auto r : train) {
    for (std::size_t j = 0; j < c; ++j) st.mean[j] += t.signals(r, j);
  }
  for (auto& m : st.mean) m /= static_cast<double>(train.size());
  for (auto r : train) {
    for (std::size_t j = 0; j < c; ++j) {
      const double d = t.signals(r, j) - st.mean[j];
      st.stdev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    st.stdev[j] = std::sqrt(st.stdev[j] / static_cast<double>(train.size()));
    if (!(st.stdev[j] > 0.0)) {
      throw NumericError("channel '" + channel_name(j, c) + "' has zero variance on the training rows");
    }
  }
  NormalizedTable out{t, st};
  for (std::size_t i = 0; i < out.table.size(); ++i) {
    auto r = out.table.signals.row(i);
    for (std::size_t j = 0; j < c; ++j) r[j] = (r[j] - st.mean[j]) / st.stdev[j];
  }
  return out;
}

/// Keeps only each subject's lowest-numbered relaxation trial and checks that every
/// (subject, label) cell then holds the same number of rows.
inline SampleTable balance_relaxation(const SampleTable& t) {
  std::map<int, int> first_relax;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.label[i] != kLabelRelaxation) continue;
    auto [it, fresh] = first_relax.emplace(t.subject[i], t.trial[i]);
    if (!fresh) it->second = std::min(it->second, t.trial[i]);
  }
  for (int s : subject_ids(t)) {
    if (!first_relax.contains(s)) throw IngestionError("subject " + std::to_string(s) + " has no relaxation trial");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.label[i] != kLabelRelaxation || t.trial[i] == first_relax.at(t.subject[i])) keep.push_back(i);
  }
  SampleTable out = select_rows(t, keep);
  std::map<std::pair<int, int>, std::size_t> cells;
  std::set<int> labels(out.label.begin(), out.label.end());
  for (std::size_t i = 0; i < out.size(); ++i) ++cells[{out.subject[i], out.label[i]}];
  std::optional<std::size_t> common;
  for (int s : subject_ids(out)) {
    for (int y : labels) {
      const auto it = cells.find({s, y});
      const std::size_t n = it == cells.end() ? 0 : it->second;
      if (!common) common = n;
      if (n != *common) {
        throw IngestionError("unbalanced after relaxation selection: subject " + std::to_string(s) + " label " +
                             std::to_string(y) + " has " + std::to_string(n) + " rows, expected " +
                             std::to_string(*common));
      }
    }
  }
  return out;
}

// Leave-one-subject-out ----------------------------------------------------------------------

struct FoldSpec {
  int held_out = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  bool operator==(const FoldSpec&) const = default;
};

inline constexpr double kValidationFraction = 0.10;

namespace detail {

/// Rows of `rows` grouped by (subject, label), in key order.
inline std::map<std::pair<int, int>, std::vector<std::size_t>> cells_of(const SampleTable& t,
                                                                         std::span<const std::size_t> rows) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (auto r : rows) cells[{t.subject[r], t.label[r]}].push_back(r);
  return cells;
}

/// Largest-remainder apportionment of round(fraction * total) over cells.
inline std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, double fraction) {
  std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 0.5));
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double q = fraction * static_cast<double>(sizes[i]);
    out[i] = static_cast<std::size_t>(std::floor(q));
    assigned += out[i];
    rem.emplace_back(-(q - std::floor(q)), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t k = 0; assigned < target && k < rem.size(); ++k, ++assigned) ++out[rem[k].second];
  return out;
}

}  // namespace detail

/// Held-out subject forms the test set; the remaining rows are split 90/10 into train and
/// validation, stratified by (subject, label).
inline FoldSpec loso_split(const SampleTable& t, int held_out, std::uint64_t seed) {
  FoldSpec f;
  f.held_out = held_out;
  f.seed = seed;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < t.size(); ++i) (t.subject[i] == held_out ? f.test : pool).push_back(i);
  if (f.test.empty()) throw ArgumentError("subject " + std::to_string(held_out) + " is not in the table");
  auto cells = detail::cells_of(t, pool);
  std::vector<std::size_t> sizes;
  for (const auto& [key, rows] : cells) sizes.push_back(rows.size());
  const auto quotas = detail::apportion(sizes, kValidationFraction);
  Rng rng(derive_seed(seed, {stream::kSplit}));
  std::size_t k = 0;
  for (auto& [key, rows] : cells) {
    std::shuffle(rows.begin(), rows.end(), rng);
    f.validation.insert(f.validation.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quotas[k]));
    f.train.insert(f.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(quotas[k]), rows.end());
    ++k;
  }
  std::sort(f.train.begin(), f.train.end());
  std::sort(f.validation.begin(), f.validation.end());
  return f;
}

/// FNV-1a over the fold membership; equal hashes mean identical splits.
inline std::uint64_t split_hash(const FoldSpec& f) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto eat = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  eat(static_cast<std::uint64_t>(f.held_out));
  for (const auto* part : {&f.train, &f.validation, &f.test}) {
    eat(part->size());
    for (auto v : *part) eat(v);
  }
  return h;
}

/// Keeps round(fraction * n) rows of every (subject, label) cell of train + validation, then
/// restricts both sets to the kept rows. fraction == 1 returns the fold unchanged.
inline FoldSpec subsample_fold(const SampleTable& t, const FoldSpec& f, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("data fraction must be in (0, 1]");
  if (fraction == 1.0) return f;
  std::vector<std::size_t> pool = f.train;
  pool.insert(pool.end(), f.validation.begin(), f.validation.end());
  std::sort(pool.begin(), pool.end());
  auto cells = detail::cells_of(t, pool);
  Rng rng(derive_seed(seed, {stream::kSubsample}));
  std::vector<char> kept(t.size(), 0);
  for (auto& [key, rows] : cells) {
    const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()) + 0.5));
    if (n == 0) {
      throw ArgumentError("fraction " + std::to_string(fraction) + " empties subject " + std::to_string(key.first) +
                          " label " + std::to_string(key.second));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < n; ++i) kept[rows[i]] = 1;
  }
  FoldSpec out = f;
  const auto filter = [&kept](std::vector<std::size_t>& v) {
    std::erase_if(v, [&kept](std::size_t r) { return kept[r] == 0; });
  };
  filter(out.train);
  filter(out.validation);
  if (out.train.empty() || out.validation.empty()) {
    throw ArgumentError("fraction " + std::to_string(fraction) + " leaves an empty train or validation set");
  }
  return out;
}

// Synthetic generator ------------------------------------------------------------------------

struct SynthParams {
  std::size_t subjects = 20;
  std::size_t classes = 4;
  std::size_t channels = 7;
  std::size_t samples_per_cell = 30;
  double sigma_task = 1.0;
  double sigma_subject = 1.5;
  double sigma_noise = 0.3;

  bool operator==(const SynthParams&) const = default;
};

/// X = T onehot(y) + U onehot(s) + noise, with T (C x L) and U (C x S) drawn once per seed.
/// Every (subject, label) cell gets the same number of rows, so y and s are independent.
inline SampleTable synth_generate(const SynthParams& p, std::uint64_t seed) {
  if (p.subjects == 0 || p.classes == 0 || p.channels == 0 || p.samples_per_cell == 0) {
    throw ArgumentError("synthetic generator counts must be >= 1");
  }
  if (p.sigma_task < 0.0 || p.sigma_subject < 0.0 || p.sigma_noise < 0.0) {
    throw ArgumentError("synthetic generator sigmas must be >= 0");
  }
  Rng rng(derive_seed(seed, {stream::kSynthetic}));
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix task(p.channels, p.classes);
  for (double& v : task.values()) v = p.sigma_task * unit(rng);
  Matrix subj(p.channels, p.subjects);
  for (double& v : subj.values()) v = p.sigma_subject * unit(rng);

  SampleTable t;
  const std::size_t n = p.subjects * p.classes * p.samples_per_cell;
  t.signals = Matrix(n, p.channels);
  std::size_t row = 0;
  for (std::size_t s = 0; s < p.subjects; ++s) {
    for (std::size_t y = 0; y < p.classes; ++y) {
      for (std::size_t k = 0; k < p.samples_per_cell; ++k, ++row) {
        t.subject.push_back(static_cast<int>(s + 1));
        t.trial.push_back(static_cast<int>(y + 1));
        t.label.push_back(static_cast<int>(y));
        t.time.push_back(static_cast<int>(k));
        auto r = t.signals.row(row);
        for (std::size_t c = 0; c < p.channels; ++c) {
          r[c] = task(c, y) + subj(c, s) + p.sigma_noise * unit(rng);
        }
      }
    }
  }
  return t;
}

}  // namespace rae
