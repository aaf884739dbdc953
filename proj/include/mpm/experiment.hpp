#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mpm/config_json.hpp"
#include "mpm/cwt.hpp"
#include "mpm/labels.hpp"
#include "mpm/probe_grid.hpp"
#include "mpm/synth.hpp"

namespace mpm {

struct CorpusSource {
  enum class Kind { kSynthetic, kDirectory };
  Kind kind = Kind::kSynthetic;
  std::string directory;  // wav files, searched recursively
  SynthConfig synthetic;
};

struct ProbeSettings {
  std::vector<ProbeKind> kinds{ProbeKind::kLinear};
  ProbeTrainConfig train;
  ProbeSpec conformer;  // shape fields only
  int folds = 5;
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

/// Task names understood by the pipeline.
const std::vector<std::string>& known_tasks();

struct ExperimentConfig {
  std::string name = "mpm";
  std::uint64_t seed = 0;  // MPM training seed
  std::string output_dir = "runs/mpm";
  bool deterministic = false;
  CorpusSource corpus;
  FeatureConfig features;
  CwtConfig cwt;
  int codebook_size = 128;
  std::vector<std::string> strategies{"4", "16", "128", "random"};
  MpmConfig model;
  TrainConfig train;
  ProbeSettings probe;
  std::vector<std::string> representations{"raw", "cwt", "mpm:4", "mpm:16", "mpm:128", "mpm:random"};
  std::vector<std::string> tasks{"utterance_class", "pulse", "prominence", "boundary", "permuted_class"};

  /// Small model and schedule sized for a laptop CPU on the synthetic corpus.
  static ExperimentConfig desk();

  void validate() const;
  std::string hash() const;  // FNV-1a over the canonical JSON dump
  std::filesystem::path out() const { return output_dir; }
};

void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);
void to_json(Json& j, const SynthConfig& c);
void from_json(const Json& j, SynthConfig& c);
void to_json(Json& j, const CwtConfig& c);
void from_json(const Json& j, CwtConfig& c);
void to_json(Json& j, const ProbeTrainConfig& c);
void from_json(const Json& j, ProbeTrainConfig& c);

/// Missing keys keep their desk() defaults; unknown keys are config errors.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& cfg);

struct StageRecord {
  std::string status;  // ok | partial | failed
  double seconds = 0.0;
  Json details = Json::object();
};

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string stage;
  std::string hash;
};

struct RunManifest {
  static constexpr const char* kFileName = "manifest.json";

  std::string config_hash;
  Json config;
  Json versions;
  std::map<std::string, StageRecord> stages;
  std::vector<ArtifactRecord> artifacts;

  /// Loads the manifest in cfg.out(); a missing one, or one written for a
  /// different config, starts empty.
  static RunManifest open(const ExperimentConfig& cfg);
  void record_artifact(const ExperimentConfig& cfg, const std::filesystem::path& relative, const std::string& stage);
  void drop_stage_artifacts(const std::string& stage);
  /// Hash over the config hash and the artifact list; timings are left out.
  std::string content_hash() const;
  void save(const ExperimentConfig& cfg) const;
};

// Output layout under output_dir:
//   features/            prosody feature cache, labels.tsv, sources.tsv
//   cwt/                 CWT feature cache
//   checkpoints/         mpm_<strategy>.ckpt and mpm_<strategy>.log.tsv
//   report.tsv, summary.txt               from probe
//   sweep_report.tsv, sweep_summary.txt   from sweep
//   manifest.json, config.json

struct FeaturesOutcome {
  int computed = 0;
  int skipped = 0;
  std::vector<std::string> failed;  // unreadable inputs
  int exit_code() const { return failed.empty() ? 0 : 2; }
};

FeaturesOutcome cmd_features(const ExperimentConfig& cfg);

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, const std::string& strategy);
std::filesystem::path train_log_path(const ExperimentConfig& cfg, const std::string& strategy);

/// Trains one strategy on the cached corpus and writes its checkpoint and a
/// per-step log (step, loss, masked accuracy, mask length).
TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& strategy);

/// Corpus-ordered inputs for the probe grid.
struct ProbeInputs {
  std::vector<Representation> representations;
  std::vector<ProbeTask> tasks;
  std::map<std::string, std::string> checkpoint_hashes;  // representation -> checkpoint file hash
  std::map<std::string, std::uint64_t> encoder_hashes;   // representation -> parameter hash
};

/// Throws kMissingArtifact naming the missing stage unless tolerate_missing,
/// in which case a representation without artifacts is left empty and its
/// cells come out absent.
ProbeInputs build_probe_inputs(const ExperimentConfig& cfg, const std::vector<std::string>& representations,
                               bool tolerate_missing);

/// Runs the grid over cfg.representations and writes report.tsv and summary.txt.
EvalReport cmd_probe(const ExperimentConfig& cfg);

struct SweepOutcome {
  EvalReport report;
  std::vector<std::string> failed_strategies;
  int exit_code() const { return failed_strategies.empty() && report.absent_cells() == 0 ? 0 : 2; }
};

/// Trains every strategy (failures isolated), then probes raw/cwt (when
/// listed) plus every mpm strategy with shared folds and seeds.
SweepOutcome cmd_sweep(const ExperimentConfig& cfg);

/// True when every representation in the report was evaluated on the same
/// (task, probe, fold, seed) cells.
bool paired_protocol(const EvalReport& report);

/// Writes <out_dir>/tables.md, metric_vs_mask.svg and, when training logs are
/// found in log_dir, loss_curves.svg. Returns the paths written.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& report_path,
                                              const std::filesystem::path& out_dir,
                                              const std::filesystem::path& log_dir = {});

/// Lists report outputs that live under cfg.out() in its run manifest.
void record_report_artifacts(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& written,
                             double seconds);

/// Writes the synthetic corpus of cfg.corpus.synthetic to out_dir as a
/// feature cache plus labels.tsv.
void cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Recursively collected .wav files, sorted.
std::vector<std::filesystem::path> list_wav_files(const std::filesystem::path& dir);

}  // namespace mpm
