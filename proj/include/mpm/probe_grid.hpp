#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mpm/probe.hpp"

namespace mpm {

/// Frozen per-frame features, one matrix per utterance, in corpus order.
struct Representation {
  std::string name;  // "raw", "cwt", "mpm:<strategy>"
  std::vector<MatrixXf> frames;
};

/// Labels per utterance in corpus order. Utterances with no labels (e.g. no
/// words for a span task) are left out of that task.
struct ProbeTask {
  std::string name;
  Granularity granularity = Granularity::kUtterance;
  int num_classes = 2;
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<FrameSpan>> spans;  // span tasks only
  std::vector<int> syllable_counts;           // frame tasks: adds ser and corr
};

struct GridConfig {
  std::vector<ProbeKind> probes{ProbeKind::kLinear};
  int folds = 5;
  std::vector<std::uint64_t> seeds{0};
  ProbeSpec conformer;  // shape fields only
  ProbeTrainConfig train;
  int workers = 1;
  double syllable_threshold = 0.5;
  int syllable_min_gap = 3;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct EvalRow {
  std::string representation;
  std::string strategy;  // corruption strategy for mpm representations, "-" otherwise
  std::string task;
  std::string probe;
  int fold = 0;
  std::uint64_t seed = 0;
  bool present = true;  // false marks an absent cell
  double wa = kMissing, ua = kMissing, f1 = kMissing, ser = kMissing, corr = kMissing;
  std::string config_hash = "-";
  std::string checkpoint_hash = "-";
  std::string note = "-";

  double metric(const std::string& name) const;
};

struct AggregateRow {
  std::string representation, strategy, task, probe, metric;
  double mean = kMissing;
  double stddev = kMissing;  // sample standard deviation
  int count = 0;
  int absent = 0;
};

const std::vector<std::string>& metric_names();

/// Tab-separated columns in this order:
///   representation strategy task probe fold seed status wa ua f1 ser corr
///   config_hash checkpoint_hash note
/// status is "ok" or "absent"; undefined metrics are written as "NA".
struct EvalReport {
  std::vector<EvalRow> rows;

  std::vector<AggregateRow> aggregate() const;
  int absent_cells() const;
  void append(const EvalReport& other);

  void write_tsv(std::ostream& out) const;
  static EvalReport read_tsv(std::istream& in);
  void save(const std::string& path) const;
  static EvalReport load(const std::string& path);

  /// Per task: one line per (representation, probe), "mean +- std" per metric.
  std::string summary_table() const;
};

std::string strategy_of(const std::string& representation_name);

/// Fold assignment and probe seeds depend on (task, fold, seed) only.
std::vector<int> task_folds(const ProbeTask& task, int folds, std::uint64_t seed);
std::uint64_t probe_seed(const std::string& task, int fold, std::uint64_t seed);

/// Every (representation, task, probe, fold, seed) cell. A cell that throws
/// is kept as an absent row carrying the error message.
EvalReport run_probe_grid(const std::vector<Representation>& representations, const std::vector<ProbeTask>& tasks,
                          const GridConfig& cfg);

/// Worker count from MPM_WORKERS, defaulting to 1.
int workers_from_env();

}  // namespace mpm
