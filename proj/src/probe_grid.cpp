#include "mpm/probe_grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "mpm/error.hpp"
#include "mpm/hash.hpp"
#include "mpm/log.hpp"
#include "mpm/metrics.hpp"

namespace mpm {

namespace {

const char* kColumns[] = {"representation", "strategy", "task", "probe",      "fold",       "seed",        "status", "wa",
                          "ua",             "f1",       "ser",  "corr",       "config_hash", "checkpoint_hash", "note"};
constexpr std::size_t kNumColumns = sizeof(kColumns) / sizeof(kColumns[0]);

std::string format_metric(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_metric(const std::string& s, int line) {
  if (s == "NA") return kMissing;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw Error(ErrorCode::kSchema, "report line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::string sanitize_note(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s.empty() ? "-" : s;
}

std::vector<int> eligible_utterances(const ProbeTask& t) {
  std::vector<int> out;
  for (std::size_t u = 0; u < t.labels.size(); ++u) {
    if (!t.labels[u].empty()) out.push_back(static_cast<int>(u));
  }
  return out;
}

ProbeSequence make_sequence(const Representation& rep, const ProbeTask& task, int u) {
  const auto uu = static_cast<std::size_t>(u);
  if (uu >= rep.frames.size()) throw Error(ErrorCode::kMissingArtifact, rep.name + ": no features for utterance");
  ProbeSequence s;
  s.frames = rep.frames[uu];
  s.labels = task.labels[uu];
  if (task.granularity == Granularity::kSpan) s.spans = task.spans.at(uu);
  if (task.granularity == Granularity::kFrame && static_cast<Eigen::Index>(s.labels.size()) != s.frames.rows()) {
    throw Error(ErrorCode::kAlignment, rep.name + "/" + task.name + ": frame labels do not match feature frames");
  }
  return s;
}

void evaluate_cell(const Representation& rep, const ProbeTask& task, ProbeKind kind, int fold, std::uint64_t seed,
                   const GridConfig& cfg, EvalRow& row) {
  const std::vector<int> eligible = eligible_utterances(task);
  const std::vector<int> folds = task_folds(task, cfg.folds, seed);
  std::vector<ProbeSequence> train, test;
  std::vector<int> test_ids;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    ProbeSequence s = make_sequence(rep, task, eligible[i]);
    if (folds[i] == fold) {
      test.push_back(std::move(s));
      test_ids.push_back(eligible[i]);
    } else {
      train.push_back(std::move(s));
    }
  }
  ProbeSpec spec = cfg.conformer;
  spec.kind = kind;
  spec.granularity = task.granularity;
  spec.num_classes = task.num_classes;
  spec.input_dim = static_cast<int>(train.front().frames.cols());
  const ProbeModel model = train_probe(train, spec, cfg.train, probe_seed(task.name, fold, seed));
  const Predictions pred = model.predict(test);

  std::vector<int> gold;
  for (const auto& s : test) gold.insert(gold.end(), s.labels.begin(), s.labels.end());
  const Accuracy acc = weighted_unweighted_accuracy(pred.labels, gold, task.num_classes);
  row.wa = acc.weighted;
  row.ua = acc.unweighted;
  if (task.granularity != Granularity::kUtterance && task.num_classes == 2) {
    row.f1 = f1_binary(pred.labels, gold);
  }
  if (task.granularity == Granularity::kFrame && !task.syllable_counts.empty()) {
    std::vector<int> actual, predicted;
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const Eigen::Index n = test[i].frames.rows();
      std::vector<double> p(static_cast<std::size_t>(n));
      for (Eigen::Index t = 0; t < n; ++t) p[static_cast<std::size_t>(t)] = pred.probabilities(r + t, 1);
      r += n;
      actual.push_back(task.syllable_counts.at(static_cast<std::size_t>(test_ids[i])));
      predicted.push_back(count_syllables_from_frames(p, cfg.syllable_threshold, cfg.syllable_min_gap));
    }
    row.ser = ser(actual, predicted);
    try {
      row.corr = pearson_corr(std::vector<double>(actual.begin(), actual.end()),
                              std::vector<double>(predicted.begin(), predicted.end()));
    } catch (const Error& e) {
      row.note = sanitize_note(e.what());
    }
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double EvalRow::metric(const std::string& name) const {
  if (name == "wa") return wa;
  if (name == "ua") return ua;
  if (name == "f1") return f1;
  if (name == "ser") return ser;
  if (name == "corr") return corr;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + name + "'");
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> kNames{"wa", "ua", "f1", "ser", "corr"};
  return kNames;
}

std::string strategy_of(const std::string& name) {
  const auto colon = name.find(':');
  return colon == std::string::npos ? "-" : name.substr(colon + 1);
}

std::vector<int> task_folds(const ProbeTask& task, int folds, std::uint64_t seed) {
  const int n = static_cast<int>(eligible_utterances(task).size());
  return kfold_split(n, folds, mix_seed(fnv1a64(task.name), seed));
}

std::uint64_t probe_seed(const std::string& task, int fold, std::uint64_t seed) {
  return mix_seed(mix_seed(fnv1a64(task), seed), static_cast<std::uint64_t>(fold));
}

int workers_from_env() {
  const char* v = std::getenv("MPM_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw Error(ErrorCode::kConfig, std::string("MPM_WORKERS must be a positive integer, got '") + v + "'");
  return static_cast<int>(std::min<long>(n, 256));
}

EvalReport run_probe_grid(const std::vector<Representation>& representations, const std::vector<ProbeTask>& tasks,
                          const GridConfig& cfg) {
  if (representations.empty() || tasks.empty()) throw Error(ErrorCode::kConfig, "probe grid needs representations and tasks");
  if (cfg.probes.empty() || cfg.seeds.empty()) throw Error(ErrorCode::kConfig, "probe grid needs probes and seeds");
  if (cfg.folds < 2) throw Error(ErrorCode::kConfig, "probe grid needs at least two folds");
  cfg.train.validate();

  struct Cell {
    const Representation* rep;
    const ProbeTask* task;
    ProbeKind kind;
    std::uint64_t seed;
    int fold;
  };
  std::vector<Cell> cells;
  for (const auto& rep : representations) {
    for (const auto& task : tasks) {
      for (ProbeKind kind : cfg.probes) {
        for (std::uint64_t seed : cfg.seeds) {
          for (int fold = 0; fold < cfg.folds; ++fold) cells.push_back({&rep, &task, kind, seed, fold});
        }
      }
    }
  }

  EvalReport report;
  report.rows.resize(cells.size());
  auto run = [&](std::size_t i) {
    const Cell& c = cells[i];
    EvalRow& row = report.rows[i];
    row.representation = c.rep->name;
    row.strategy = strategy_of(c.rep->name);
    row.task = c.task->name;
    row.probe = to_string(c.kind);
    row.fold = c.fold;
    row.seed = c.seed;
    try {
      evaluate_cell(*c.rep, *c.task, c.kind, c.fold, c.seed, cfg, row);
    } catch (const std::exception& e) {
      row.present = false;
      row.wa = row.ua = row.f1 = row.ser = row.corr = kMissing;
      row.note = sanitize_note(e.what());
      warn("probe cell " + row.representation + "/" + row.task + "/" + row.probe + " fold " +
           std::to_string(row.fold) + " absent: " + e.what());
    }
  };

  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return report;
}

int EvalReport::absent_cells() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const EvalRow& r) { return !r.present; }));
}

void EvalReport::append(const EvalReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

std::vector<AggregateRow> EvalReport::aggregate() const {
  std::vector<AggregateRow> out;
  std::vector<std::vector<double>> values;
  auto find = [&](const EvalRow& r, const std::string& metric) -> std::size_t {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const AggregateRow& a = out[i];
      if (a.representation == r.representation && a.strategy == r.strategy && a.task == r.task &&
          a.probe == r.probe && a.metric == metric) {
        return i;
      }
    }
    out.push_back({r.representation, r.strategy, r.task, r.probe, metric});
    values.emplace_back();
    return out.size() - 1;
  };
  for (const EvalRow& r : rows) {
    for (const std::string& m : metric_names()) {
      const double v = r.metric(m);
      if (r.present && std::isnan(v)) continue;
      const std::size_t i = find(r, m);
      if (!r.present) {
        ++out[i].absent;
        continue;
      }
      values[i].push_back(v);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    out[i].count = static_cast<int>(v.size());
    if (v.empty()) continue;
    out[i].mean = mean_of(v);
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - out[i].mean) * (x - out[i].mean);
      out[i].stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    } else {
      out[i].stddev = 0.0;
    }
  }
  return out;
}

void EvalReport::write_tsv(std::ostream& out) const {
  for (std::size_t c = 0; c < kNumColumns; ++c) out << (c ? "\t" : "") << kColumns[c];
  out << '\n';
  for (const EvalRow& r : rows) {
    out << r.representation << '\t' << r.strategy << '\t' << r.task << '\t' << r.probe << '\t' << r.fold << '\t'
        << r.seed << '\t' << (r.present ? "ok" : "absent") << '\t' << format_metric(r.wa) << '\t'
        << format_metric(r.ua) << '\t' << format_metric(r.f1) << '\t' << format_metric(r.ser) << '\t'
        << format_metric(r.corr) << '\t' << r.config_hash << '\t' << r.checkpoint_hash << '\t'
        << sanitize_note(r.note) << '\n';
  }
}

EvalReport EvalReport::read_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchema, "empty report");
  {
    std::stringstream ss(line);
    std::string col;
    std::size_t c = 0;
    while (std::getline(ss, col, '\t')) {
      if (c >= kNumColumns || col != kColumns[c]) throw Error(ErrorCode::kSchema, "report header mismatch at column " + std::to_string(c + 1));
      ++c;
    }
    if (c != kNumColumns) throw Error(ErrorCode::kSchema, "report header has " + std::to_string(c) + " columns");
  }
  EvalReport rep;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, '\t')) f.push_back(item);
    if (f.size() != kNumColumns) {
      throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": expected " +
                                          std::to_string(kNumColumns) + " fields, got " + std::to_string(f.size()));
    }
    EvalRow r;
    r.representation = f[0];
    r.strategy = f[1];
    r.task = f[2];
    r.probe = f[3];
    try {
      r.fold = std::stoi(f[4]);
      r.seed = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": bad fold or seed");
    }
    if (f[6] != "ok" && f[6] != "absent") throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": bad status");
    r.present = f[6] == "ok";
    r.wa = parse_metric(f[7], lineno);
    r.ua = parse_metric(f[8], lineno);
    r.f1 = parse_metric(f[9], lineno);
    r.ser = parse_metric(f[10], lineno);
    r.corr = parse_metric(f[11], lineno);
    for (double v : {r.wa, r.ua, r.f1}) {
      if (!std::isnan(v) && (v < 0.0 || v > 1.0)) throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": accuracy/F1 outside [0, 1]");
    }
    if (!std::isnan(r.ser) && r.ser < 0.0) throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": negative SER");
    if (!std::isnan(r.corr) && (r.corr < -1.0 || r.corr > 1.0)) throw Error(ErrorCode::kSchema, "report line " + std::to_string(lineno) + ": correlation outside [-1, 1]");
    r.config_hash = f[12];
    r.checkpoint_hash = f[13];
    r.note = f[14];
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

void EvalReport::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  write_tsv(out);
}

EvalReport EvalReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "report not found: " + path);
  return read_tsv(in);
}

std::string EvalReport::summary_table() const {
  const std::vector<AggregateRow> agg = aggregate();
  std::vector<std::string> tasks;
  for (const auto& a : agg) {
    if (std::find(tasks.begin(), tasks.end(), a.task) == tasks.end()) tasks.push_back(a.task);
  }
  std::ostringstream out;
  for (const std::string& task : tasks) {
    std::vector<std::string> metrics;
    std::vector<std::pair<std::string, std::string>> lines;  // (representation, probe)
    for (const auto& a : agg) {
      if (a.task != task) continue;
      if ((a.count > 0 || a.absent > 0) && std::find(metrics.begin(), metrics.end(), a.metric) == metrics.end()) {
        metrics.push_back(a.metric);
      }
      const std::pair<std::string, std::string> key{a.representation, a.probe};
      if (std::find(lines.begin(), lines.end(), key) == lines.end()) lines.push_back(key);
    }
    std::sort(metrics.begin(), metrics.end(), [](const std::string& x, const std::string& y) {
      const auto& n = metric_names();
      return std::find(n.begin(), n.end(), x) < std::find(n.begin(), n.end(), y);
    });
    out << "task: " << task << '\n';
    out << std::left << std::setw(20) << "representation" << std::setw(11) << "probe";
    for (const auto& m : metrics) out << std::setw(18) << m;
    out << '\n';
    for (const auto& [rep, probe] : lines) {
      out << std::setw(20) << rep << std::setw(11) << probe;
      for (const auto& m : metrics) {
        std::string cell = "--";
        for (const auto& a : agg) {
          if (a.task == task && a.representation == rep && a.probe == probe && a.metric == m && a.count > 0) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.4f +- %.4f", a.mean, a.stddev);
            cell = buf;
            if (a.absent > 0) cell += "*";
          }
        }
        out << std::setw(18) << cell;
      }
      out << '\n';
    }
    out << '\n';
  }
  out << "-- no value; * some cells absent\n";
  return out.str();
}

}  // namespace mpm
