#include "mpm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <compare>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>

#include "mpm/error.hpp"
#include "mpm/hash.hpp"
#include "mpm/log.hpp"
#include "mpm/parsers.hpp"
#include "mpm/plot.hpp"
#include "mpm/wav.hpp"

namespace mpm {
namespace fs = std::filesystem;

namespace {

constexpr const char* kFeaturesDir = "features";
constexpr const char* kCwtDir = "cwt";
constexpr const char* kCheckpointDir = "checkpoints";
constexpr const char* kLabelsFile = "labels.tsv";
constexpr const char* kSourcesFile = "sources.tsv";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_keys(const Json& j, const Json& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw Error(ErrorCode::kConfig, "unknown config key " + where + "." + it.key());
  }
}

template <typename T>
void read_section(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  check_keys(j.at(key), Json(out), where + "." + key);
  from_json(j.at(key), out);
}

std::string kind_name(CorpusSource::Kind k) {
  return k == CorpusSource::Kind::kSynthetic ? "synthetic" : "directory";
}

int workers_for(const ExperimentConfig& cfg) { return cfg.deterministic ? 1 : workers_from_env(); }

FeatureCache open_stage_cache(const fs::path& dir) {
  try {
    return FeatureCache::open(dir);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kMissingArtifact) throw;
    throw Error(ErrorCode::kMissingArtifact, "no feature cache in " + dir.string() + "; run the features stage first");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string hash_hex(const fs::path& p) { return hex64(hash_file(p.string())); }

template <typename Scalar>
std::uint64_t parameter_hash(const MpmModel<Scalar>& model) {
  std::uint64_t h = fnv1a64(std::string_view{});
  model.visit("", [&](const std::string& name, const nn::Parameter<Scalar>& p) {
    h = fnv1a64(name.data(), name.size(), h);
    h = fnv1a64(p.value.data(), sizeof(Scalar) * static_cast<std::size_t>(p.value.size()), h);
  });
  return h;
}

struct SourceEntry {
  std::string source;
  std::string hash;
};

std::map<std::string, SourceEntry> read_sources(const fs::path& path) {
  std::map<std::string, SourceEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string id;
    SourceEntry e;
    if (std::getline(ss, id, '\t') && std::getline(ss, e.source, '\t') && std::getline(ss, e.hash, '\t')) out[id] = e;
  }
  return out;
}

void write_sources(const fs::path& path, const std::vector<std::pair<std::string, SourceEntry>>& rows) {
  std::ostringstream o;
  o << "id\tsource\tcontent_hash\n";
  for (const auto& [id, e] : rows) o << id << '\t' << e.source << '\t' << e.hash << '\n';
  write_text(path, o.str());
}

FeatureRecord cwt_record(const std::string& id, const ProsodyTrack& track, const CwtConfig& cfg) {
  FeatureRecord rec;
  rec.id = id;
  rec.hop_seconds = track.hop_seconds;
  rec.columns = cwt_encode(track, cfg).values.cast<float>();
  return rec;
}

// Labels found next to a wav file: RAVDESS-style name, <stem>.phn vowel
// alignment, <stem>.tobi timed word tier.
LabeledUtterance directory_labels(const fs::path& wav, const std::string& id, const ProsodyTrack& track,
                                  int sample_rate) {
  LabeledUtterance l;
  l.id = id;
  l.provenance = Provenance::kReal;
  const int n = track.num_frames();
  try {
    const RavdessId r = parse_ravdess_id(wav.filename().string());
    l.utterance_label = r.emotion;
    l.speaker = r.speaker;
  } catch (const Error&) {
  }
  fs::path phn = wav;
  phn.replace_extension(".phn");
  if (fs::exists(phn)) {
    TimitOptions opts;
    opts.sample_rate = sample_rate;
    opts.hop_seconds = track.hop_seconds;
    opts.num_frames = n;
    const TimitAlignment a = parse_timit_alignment_file(phn.string(), opts);
    l.frame_labels = a.vowel_frames;
    l.syllable_count = a.syllable_count;
  }
  fs::path tobi = wav;
  tobi.replace_extension(".tobi");
  if (fs::exists(tobi)) {
    int prev_end = 0;
    bool untimed = false;
    for (const TobiWord& w : parse_tobi_labels_file(tobi.string())) {
      if (!w.timed()) {
        untimed = true;
        continue;
      }
      WordLabel wl;
      wl.word = w.word;
      wl.span.start = std::max(prev_end, static_cast<int>(std::floor(w.start_seconds / track.hop_seconds + 1e-9)));
      wl.span.end = std::min(n, static_cast<int>(std::ceil(w.end_seconds / track.hop_seconds - 1e-9)));
      if (wl.span.end <= wl.span.start) continue;
      wl.prominence = w.prominent;
      wl.boundary = w.boundary;
      prev_end = wl.span.end;
      l.words.push_back(wl);
    }
    if (untimed) warn(tobi.string() + ": words without timing skipped");
  }
  l.validate();
  return l;
}

std::string wav_id(const fs::path& root, const fs::path& wav) {
  fs::path rel = fs::relative(wav, root);
  rel.replace_extension();
  return rel.generic_string();
}

struct Cell {
  std::string task, probe;
  int fold;
  std::uint64_t seed;
  auto operator<=>(const Cell&) const = default;
};

std::string report_cell(const AggregateRow& a) {
  if (a.count == 0) return a.absent > 0 ? "absent" : "--";
  char buf[64];
  if (a.count > 1 && !std::isnan(a.stddev)) {
    std::snprintf(buf, sizeof buf, "%.4f +- %.4f", a.mean, a.stddev);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", a.mean);
  }
  std::string s = buf;
  if (a.absent > 0) s += " *";
  return s;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> names{"utterance_class", "pulse", "prominence", "boundary", "permuted_class"};
  return names;
}

// ---- json ----

void to_json(Json& j, const SynthConfig& c) {
  Json classes = Json::array();
  for (const SynthClass& k : c.classes) {
    classes.push_back(Json{{"pitch_offset", k.pitch_offset},
                           {"range_multiplier", k.range_multiplier},
                           {"rate_multiplier", k.rate_multiplier}});
  }
  j = Json{{"num_utterances", c.num_utterances},
           {"min_duration_seconds", c.min_duration_seconds},
           {"max_duration_seconds", c.max_duration_seconds},
           {"hop_seconds", c.hop_seconds},
           {"min_rate_hz", c.min_rate_hz},
           {"max_rate_hz", c.max_rate_hz},
           {"rate_jitter", c.rate_jitter},
           {"max_word_syllables", c.max_word_syllables},
           {"prominence_probability", c.prominence_probability},
           {"prominence_gain", c.prominence_gain},
           {"pause_probability", c.pause_probability},
           {"min_pause_seconds", c.min_pause_seconds},
           {"max_pause_seconds", c.max_pause_seconds},
           {"edge_silence_seconds", c.edge_silence_seconds},
           {"base_pitch_hz", c.base_pitch_hz},
           {"offset_semitones", c.offset_semitones},
           {"declination_semitones", c.declination_semitones},
           {"wiggle_semitones", c.wiggle_semitones},
           {"pitch_noise_semitones", c.pitch_noise_semitones},
           {"energy_noise", c.energy_noise},
           {"classes", classes},
           {"seed", c.seed}};
}

void from_json(const Json& j, SynthConfig& c) {
  get_if(j, "num_utterances", c.num_utterances);
  get_if(j, "min_duration_seconds", c.min_duration_seconds);
  get_if(j, "max_duration_seconds", c.max_duration_seconds);
  get_if(j, "hop_seconds", c.hop_seconds);
  get_if(j, "min_rate_hz", c.min_rate_hz);
  get_if(j, "max_rate_hz", c.max_rate_hz);
  get_if(j, "rate_jitter", c.rate_jitter);
  get_if(j, "max_word_syllables", c.max_word_syllables);
  get_if(j, "prominence_probability", c.prominence_probability);
  get_if(j, "prominence_gain", c.prominence_gain);
  get_if(j, "pause_probability", c.pause_probability);
  get_if(j, "min_pause_seconds", c.min_pause_seconds);
  get_if(j, "max_pause_seconds", c.max_pause_seconds);
  get_if(j, "edge_silence_seconds", c.edge_silence_seconds);
  get_if(j, "base_pitch_hz", c.base_pitch_hz);
  get_if(j, "offset_semitones", c.offset_semitones);
  get_if(j, "declination_semitones", c.declination_semitones);
  get_if(j, "wiggle_semitones", c.wiggle_semitones);
  get_if(j, "pitch_noise_semitones", c.pitch_noise_semitones);
  get_if(j, "energy_noise", c.energy_noise);
  get_if(j, "seed", c.seed);
  if (j.contains("classes")) {
    c.classes.clear();
    const Json known{{"pitch_offset", 0}, {"range_multiplier", 0}, {"rate_multiplier", 0}};
    for (const Json& k : j.at("classes")) {
      check_keys(k, known, "synthetic.classes[]");
      SynthClass sc;
      get_if(k, "pitch_offset", sc.pitch_offset);
      get_if(k, "range_multiplier", sc.range_multiplier);
      get_if(k, "rate_multiplier", sc.rate_multiplier);
      c.classes.push_back(sc);
    }
  }
}

void to_json(Json& j, const CwtConfig& c) {
  j = Json{{"wavelet", to_string(c.wavelet)},
           {"scales", c.scales},
           {"boundary", to_string(c.boundary)},
           {"support", c.support}};
}

void from_json(const Json& j, CwtConfig& c) {
  std::string name;
  get_if(j, "wavelet", name);
  if (!name.empty() && name != to_string(Wavelet::kMexicanHat)) throw Error(ErrorCode::kConfig, "unknown wavelet '" + name + "'");
  name.clear();
  get_if(j, "boundary", name);
  if (!name.empty() && name != to_string(Boundary::kReflect)) throw Error(ErrorCode::kConfig, "unknown cwt boundary '" + name + "'");
  get_if(j, "scales", c.scales);
  get_if(j, "support", c.support);
}

void to_json(Json& j, const ProbeTrainConfig& c) {
  j = Json{{"steps", c.steps},
           {"batch_size", c.batch_size},
           {"peak_lr", c.peak_lr},
           {"warmup_steps", c.warmup_steps},
           {"weight_decay", c.weight_decay}};
}

void from_json(const Json& j, ProbeTrainConfig& c) {
  get_if(j, "steps", c.steps);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "peak_lr", c.peak_lr);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "weight_decay", c.weight_decay);
}

namespace {

Json probe_shape_json(const ProbeSpec& s) {
  return Json{{"dim", s.conformer_dim},
              {"blocks", s.conformer_blocks},
              {"heads", s.conformer_heads},
              {"feedforward_dim", s.conformer_feedforward_dim},
              {"kernel_size", s.conformer_kernel_size}};
}

void probe_shape_from_json(const Json& j, ProbeSpec& s) {
  check_keys(j, probe_shape_json(s), "probe.conformer");
  get_if(j, "dim", s.conformer_dim);
  get_if(j, "blocks", s.conformer_blocks);
  get_if(j, "heads", s.conformer_heads);
  get_if(j, "feedforward_dim", s.conformer_feedforward_dim);
  get_if(j, "kernel_size", s.conformer_kernel_size);
}

Json model_json(const MpmConfig& m) {
  Json j = m;
  j.erase("codebook_sizes");
  return j;
}

Json train_json(const TrainConfig& t) {
  Json j = t;
  j.erase("seed");
  return j;
}

}  // namespace

void to_json(Json& j, const ExperimentConfig& c) {
  std::vector<std::string> kinds;
  for (ProbeKind k : c.probe.kinds) kinds.push_back(to_string(k));
  j = Json{{"name", c.name},
           {"seed", c.seed},
           {"output_dir", c.output_dir},
           {"deterministic", c.deterministic},
           {"corpus",
            Json{{"source", kind_name(c.corpus.kind)},
                 {"directory", c.corpus.directory},
                 {"synthetic", c.corpus.synthetic}}},
           {"features", c.features},
           {"cwt", c.cwt},
           {"codebook_size", c.codebook_size},
           {"strategies", c.strategies},
           {"model", model_json(c.model)},
           {"train", train_json(c.train)},
           {"probe",
            Json{{"kinds", kinds},
                 {"train", c.probe.train},
                 {"conformer", probe_shape_json(c.probe.conformer)},
                 {"folds", c.probe.folds},
                 {"seeds", c.probe.seeds}}},
           {"representations", c.representations},
           {"tasks", c.tasks}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  const Json known = c;
  check_keys(j, known, "config");
  get_if(j, "name", c.name);
  get_if(j, "seed", c.seed);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "deterministic", c.deterministic);
  if (j.contains("corpus")) {
    const Json& cj = j.at("corpus");
    check_keys(cj, known.at("corpus"), "corpus");
    std::string source = kind_name(c.corpus.kind);
    get_if(cj, "source", source);
    if (source == "synthetic") {
      c.corpus.kind = CorpusSource::Kind::kSynthetic;
    } else if (source == "directory") {
      c.corpus.kind = CorpusSource::Kind::kDirectory;
    } else {
      throw Error(ErrorCode::kConfig, "corpus.source must be synthetic or directory, got '" + source + "'");
    }
    get_if(cj, "directory", c.corpus.directory);
    read_section(cj, "synthetic", c.corpus.synthetic, "corpus");
  }
  read_section(j, "features", c.features, "config");
  read_section(j, "cwt", c.cwt, "config");
  get_if(j, "codebook_size", c.codebook_size);
  get_if(j, "strategies", c.strategies);
  if (j.contains("model")) {
    check_keys(j.at("model"), known.at("model"), "model");
    from_json(j.at("model"), c.model);
  }
  if (j.contains("train")) {
    check_keys(j.at("train"), known.at("train"), "train");
    from_json(j.at("train"), c.train);
  }
  if (j.contains("probe")) {
    const Json& pj = j.at("probe");
    check_keys(pj, known.at("probe"), "probe");
    if (pj.contains("kinds")) {
      c.probe.kinds.clear();
      for (const Json& k : pj.at("kinds")) c.probe.kinds.push_back(parse_probe_kind(k.get<std::string>()));
    }
    read_section(pj, "train", c.probe.train, "probe");
    if (pj.contains("conformer")) probe_shape_from_json(pj.at("conformer"), c.probe.conformer);
    get_if(pj, "folds", c.probe.folds);
    get_if(pj, "seeds", c.probe.seeds);
  }
  get_if(j, "representations", c.representations);
  get_if(j, "tasks", c.tasks);
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.name = "mpm-desk";
  c.output_dir = "runs/mpm-desk";
  c.model.num_layers = 2;
  c.model.model_dim = 64;
  c.model.num_heads = 4;
  c.model.feedforward_dim = 256;
  c.model.conv_kernel_size = 7;
  c.train.steps = 2000;
  c.train.batch_size = 8;
  c.train.peak_lr = 1e-3;
  c.train.warmup_steps = 200;
  c.train.log_every = 50;
  c.probe.train.peak_lr = 1e-3;
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfig, m); };
  if (output_dir.empty()) fail("output_dir is empty");
  if (codebook_size < 2) fail("codebook_size must be >= 2");
  if (strategies.empty()) fail("at least one corruption strategy is required");
  if (representations.empty()) fail("at least one representation is required");
  if (tasks.empty()) fail("at least one task is required");
  std::set<std::string> seen;
  for (const std::string& s : strategies) {
    MaskConfig::parse(s);
    if (!seen.insert(s).second) fail("duplicate strategy '" + s + "'");
  }
  std::set<std::string> reps;
  for (const std::string& r : representations) {
    if (!reps.insert(r).second) fail("duplicate representation '" + r + "'");
    if (r == "raw" || r == "cwt") continue;
    if (r.rfind("mpm:", 0) != 0) fail("unknown representation '" + r + "' (raw, cwt or mpm:<strategy>)");
    if (!seen.count(r.substr(4))) fail("representation '" + r + "' refers to an undefined strategy");
  }
  std::set<std::string> ts;
  for (const std::string& t : tasks) {
    if (std::find(known_tasks().begin(), known_tasks().end(), t) == known_tasks().end()) fail("unknown task '" + t + "'");
    if (!ts.insert(t).second) fail("duplicate task '" + t + "'");
  }
  if (corpus.kind == CorpusSource::Kind::kDirectory && corpus.directory.empty()) fail("corpus.directory is empty");
  if (corpus.kind == CorpusSource::Kind::kSynthetic) corpus.synthetic.validate();
  if (probe.kinds.empty()) fail("probe.kinds is empty");
  if (probe.folds < 2) fail("probe.folds must be >= 2");
  if (probe.seeds.empty()) fail("probe.seeds is empty");
  MpmConfig m = model;
  m.codebook_sizes = {codebook_size, codebook_size, codebook_size};
  m.validate();
  train.validate();
  probe.train.validate();
  cwt.validate();
}

std::string ExperimentConfig::hash() const {
  Json j = *this;
  j.erase("output_dir");
  j.erase("deterministic");
  return hex64(fnv1a64(j.dump()));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "config not found: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  ExperimentConfig c = ExperimentConfig::desk();
  try {
    from_json(j, c);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  c.validate();
  return c;
}

void save_experiment_config(const std::string& path, const ExperimentConfig& cfg) {
  write_text(path, Json(cfg).dump(2) + "\n");
}

// ---- manifest ----

RunManifest RunManifest::open(const ExperimentConfig& cfg) {
  RunManifest m;
  m.config_hash = cfg.hash();
  m.config = cfg;
  m.versions = Json{{"feature_record", 1},
                    {"checkpoint", MpmCheckpoint::kFormatVersion},
                    {"labels_manifest", 1},
                    {"report_columns", 15},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  const fs::path path = cfg.out() / kFileName;
  std::ifstream in(path);
  if (!in) return m;
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    warn(path.string() + " is unreadable; starting a fresh manifest");
    return m;
  }
  if (j.value("config_hash", std::string()) != m.config_hash) {
    warn(path.string() + " was written for another config; starting a fresh manifest");
    return m;
  }
  for (auto it = j["stages"].begin(); it != j["stages"].end(); ++it) {
    StageRecord r;
    r.status = it->value("status", std::string());
    r.seconds = it->value("seconds", 0.0);
    r.details = it->value("details", Json::object());
    m.stages[it.key()] = r;
  }
  for (const Json& a : j["artifacts"]) {
    m.artifacts.push_back({a.at("path").get<std::string>(), a.at("stage").get<std::string>(), a.at("hash").get<std::string>()});
  }
  return m;
}

void RunManifest::record_artifact(const ExperimentConfig& cfg, const fs::path& relative, const std::string& stage) {
  ArtifactRecord rec{relative.generic_string(), stage, hash_hex(cfg.out() / relative)};
  for (ArtifactRecord& a : artifacts) {
    if (a.path == rec.path) {
      a = rec;
      return;
    }
  }
  artifacts.push_back(rec);
}

void RunManifest::drop_stage_artifacts(const std::string& stage) {
  artifacts.erase(std::remove_if(artifacts.begin(), artifacts.end(),
                                 [&](const ArtifactRecord& a) { return a.stage == stage; }),
                  artifacts.end());
}

std::string RunManifest::content_hash() const {
  std::string s = config_hash;
  for (const ArtifactRecord& a : artifacts) s += "\n" + a.path + "\t" + a.stage + "\t" + a.hash;
  return hex64(fnv1a64(s));
}

void RunManifest::save(const ExperimentConfig& cfg) const {
  Json st = Json::object();
  for (const auto& [name, r] : stages) st[name] = Json{{"status", r.status}, {"seconds", r.seconds}, {"details", r.details}};
  Json arts = Json::array();
  for (const ArtifactRecord& a : artifacts) arts.push_back(Json{{"path", a.path}, {"stage", a.stage}, {"hash", a.hash}});
  const Json j{{"config_hash", config_hash},
               {"content_hash", content_hash()},
               {"config", config},
               {"versions", versions},
               {"stages", st},
               {"artifacts", arts}};
  fs::create_directories(cfg.out());
  write_text(cfg.out() / kFileName, j.dump(2) + "\n");
}

// ---- features ----

std::vector<fs::path> list_wav_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kMissingArtifact, "corpus directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeaturesOutcome cmd_features(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const std::string stage = "features";
  RunManifest manifest = RunManifest::open(cfg);
  const fs::path feat_dir = cfg.out() / kFeaturesDir, cwt_dir = cfg.out() / kCwtDir;
  const fs::path labels_path = feat_dir / kLabelsFile, sources_path = feat_dir / kSourcesFile;
  const bool have_caches = fs::exists(feat_dir / FeatureCache::kManifestName) &&
                           fs::exists(cwt_dir / FeatureCache::kManifestName) && fs::exists(labels_path);
  const auto previous = have_caches ? read_sources(sources_path) : std::map<std::string, SourceEntry>{};
  const std::uint64_t settings = fnv1a64(Json(cfg.features).dump() + Json(cfg.cwt).dump());

  FeaturesOutcome outcome;
  Json details{{"source", kind_name(cfg.corpus.kind)}};
  std::vector<std::pair<std::string, SourceEntry>> sources;
  std::vector<LabeledUtterance> labels;
  std::vector<FeatureRecord> feat_records, cwt_records;

  if (cfg.corpus.kind == CorpusSource::Kind::kSynthetic) {
    const SynthConfig& sc = cfg.corpus.synthetic;
    const std::string h = hex64(mix_seed(fnv1a64(Json(sc).dump()), settings));
    const std::string src = "synthetic:seed=" + std::to_string(sc.seed);
    details["generator_seed"] = sc.seed;
    bool cached = have_caches && static_cast<int>(previous.size()) == sc.num_utterances;
    for (const auto& [id, e] : previous) cached = cached && e.hash == h;
    if (cached) {
      const FeatureCache feat = FeatureCache::open(feat_dir);
      const FeatureCache cw = FeatureCache::open(cwt_dir);
      labels = load_labels_manifest(labels_path.string(), Provenance::kSynthetic);
      for (const LabeledUtterance& l : labels) {
        cached = cached && feat.contains(l.id) && cw.contains(l.id) && previous.count(l.id);
      }
    }
    if (cached) {
      outcome.skipped = sc.num_utterances;
      for (const LabeledUtterance& l : labels) sources.push_back({l.id, previous.at(l.id)});
    } else {
      SynthCorpus corpus = generate_synthetic_corpus(sc);
      labels = corpus.labels;
      for (std::size_t i = 0; i < corpus.tracks.size(); ++i) {
        const std::string& id = labels[i].id;
        feat_records.push_back(to_record(id, corpus.tracks[i]));
        cwt_records.push_back(cwt_record(id, corpus.tracks[i], cfg.cwt));
        sources.push_back({id, {src, h}});
      }
      outcome.computed = static_cast<int>(labels.size());
    }
  } else {
    const fs::path root = cfg.corpus.directory;
    const std::vector<fs::path> files = list_wav_files(root);
    if (files.empty()) throw Error(ErrorCode::kEmptyInput, "no .wav files under " + root.string());
    std::map<std::string, LabeledUtterance> old_labels;
    if (have_caches) {
      for (auto& l : load_labels_manifest(labels_path.string(), Provenance::kReal)) old_labels[l.id] = l;
    }
    std::unique_ptr<FeatureCache> old_feat, old_cwt;
    if (have_caches) {
      old_feat = std::make_unique<FeatureCache>(FeatureCache::open(feat_dir));
      old_cwt = std::make_unique<FeatureCache>(FeatureCache::open(cwt_dir));
    }

    struct Item {
      std::string id, hash, error;
      bool reused = false;
      FeatureRecord feat, cwt;
      LabeledUtterance label;
    };
    std::vector<Item> items(files.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < files.size();) {
        Item& it = items[i];
        it.id = wav_id(root, files[i]);
        try {
          std::uint64_t content = hash_file(files[i].string());
          for (const char* ext : {".phn", ".tobi"}) {
            fs::path side = files[i];
            side.replace_extension(ext);
            if (fs::exists(side)) content = mix_seed(content, hash_file(side.string()));
          }
          it.hash = hex64(mix_seed(content, settings));
          auto p = previous.find(it.id);
          if (p != previous.end() && p->second.hash == it.hash && old_labels.count(it.id) &&
              old_feat->contains(it.id) && old_cwt->contains(it.id)) {
            it.feat = old_feat->get_record(it.id);
            it.cwt = old_cwt->get_record(it.id);
            it.label = old_labels.at(it.id);
            it.reused = true;
            continue;
          }
          const Waveform w = load_waveform(files[i]);
          const ProsodyTrack track = extract_prosody(w, cfg.features);
          it.feat = to_record(it.id, track);
          it.cwt = cwt_record(it.id, track, cfg.cwt);
          it.label = directory_labels(files[i], it.id, track, w.sample_rate);
        } catch (const std::exception& e) {
          it.error = e.what();
        }
      }
    };
    const int workers = std::max(1, std::min<int>(workers_for(cfg), static_cast<int>(files.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < items.size(); ++i) {
      Item& it = items[i];
      if (!it.error.empty()) {
        warn(files[i].string() + ": " + it.error);
        outcome.failed.push_back(files[i].string());
        continue;
      }
      (it.reused ? outcome.skipped : outcome.computed) += 1;
      feat_records.push_back(std::move(it.feat));
      cwt_records.push_back(std::move(it.cwt));
      labels.push_back(std::move(it.label));
      sources.push_back({it.id, {files[i].string(), it.hash}});
    }
    if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "no readable utterances under " + root.string());
    if (outcome.computed == 0 && outcome.failed.empty() && previous.size() == labels.size()) {
      feat_records.clear();
      cwt_records.clear();
    }
  }

  const bool rewrite = !feat_records.empty();
  if (rewrite) {
    fs::remove_all(feat_dir);
    fs::remove_all(cwt_dir);
    FeatureCache feat(feat_dir), cw(cwt_dir);
    for (const FeatureRecord& r : feat_records) feat.put(r);
    for (const FeatureRecord& r : cwt_records) cw.put(r);
    feat.save_manifest();
    cw.save_manifest();
    save_labels_manifest(labels_path.string(), labels);
    write_sources(sources_path, sources);
  }

  manifest.drop_stage_artifacts(stage);
  for (const fs::path& dir : {feat_dir, cwt_dir}) {
    const FeatureCache cache = FeatureCache::open(dir);
    manifest.record_artifact(cfg, fs::relative(dir / FeatureCache::kManifestName, cfg.out()), stage);
    for (const CacheEntry& e : cache.entries()) {
      manifest.record_artifact(cfg, fs::relative(dir / e.file, cfg.out()), stage);
    }
  }
  manifest.record_artifact(cfg, fs::relative(labels_path, cfg.out()), stage);
  manifest.record_artifact(cfg, fs::relative(sources_path, cfg.out()), stage);

  details["utterances"] = labels.size();
  details["computed"] = outcome.computed;
  details["skipped"] = outcome.skipped;
  details["failed"] = outcome.failed;
  manifest.stages[stage] = {outcome.failed.empty() ? "ok" : "partial", seconds_since(t0), details};
  manifest.save(cfg);
  return outcome;
}

// ---- train ----

fs::path checkpoint_path(const ExperimentConfig& cfg, const std::string& strategy) {
  return cfg.out() / kCheckpointDir / ("mpm_" + strategy + ".ckpt");
}

fs::path train_log_path(const ExperimentConfig& cfg, const std::string& strategy) {
  return cfg.out() / kCheckpointDir / ("mpm_" + strategy + ".log.tsv");
}

TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& strategy) {
  cfg.validate();
  if (std::find(cfg.strategies.begin(), cfg.strategies.end(), strategy) == cfg.strategies.end()) {
    throw Error(ErrorCode::kConfig, "strategy '" + strategy + "' is not listed in the config");
  }
  const auto t0 = Clock::now();
  const std::string stage = "train:" + strategy;
  const FeatureCache cache = open_stage_cache(cfg.out() / kFeaturesDir);
  const Codebooks cbs = default_codebooks(cfg.codebook_size);
  const std::vector<TokenTrack> corpus = load_token_corpus(cache, cbs);

  MpmConfig mc = cfg.model;
  mc.codebook_sizes = {cfg.codebook_size, cfg.codebook_size, cfg.codebook_size};
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainResult result = train_mpm(corpus, cbs, MaskConfig::parse(strategy), tc, mc);

  fs::create_directories(cfg.out() / kCheckpointDir);
  save_checkpoint(checkpoint_path(cfg, strategy), result.checkpoint);
  std::ostringstream log;
  log << "step\tloss\tmasked_accuracy\tmask_length\n";
  char buf[96];
  for (std::size_t i = 0; i < result.step_losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t%d\n", i + 1, result.step_losses[i], result.step_accuracies[i],
                  result.batch_mask_lengths[i]);
    log << buf;
  }
  write_text(train_log_path(cfg, strategy), log.str());

  RunManifest manifest = RunManifest::open(cfg);
  manifest.drop_stage_artifacts(stage);
  manifest.record_artifact(cfg, fs::relative(checkpoint_path(cfg, strategy), cfg.out()), stage);
  manifest.record_artifact(cfg, fs::relative(train_log_path(cfg, strategy), cfg.out()), stage);
  Json details{{"steps", result.checkpoint.metadata.steps_completed},
               {"final_loss", result.checkpoint.metadata.final_loss},
               {"utterances", corpus.size()},
               {"seed", tc.seed}};
  manifest.stages[stage] = {"ok", seconds_since(t0), details};
  manifest.save(cfg);
  return result;
}

// ---- probe ----

ProbeInputs build_probe_inputs(const ExperimentConfig& cfg, const std::vector<std::string>& representations,
                               bool tolerate_missing) {
  const fs::path feat_dir = cfg.out() / kFeaturesDir;
  const FeatureCache cache = open_stage_cache(feat_dir);
  const fs::path labels_path = feat_dir / kLabelsFile;
  if (!fs::exists(labels_path)) {
    throw Error(ErrorCode::kMissingArtifact, "no labels manifest at " + labels_path.string() + "; run the features stage first");
  }
  const Provenance prov =
      cfg.corpus.kind == CorpusSource::Kind::kSynthetic ? Provenance::kSynthetic : Provenance::kReal;
  const std::vector<LabeledUtterance> labels = load_labels_manifest(labels_path.string(), prov);
  std::vector<ProsodyTrack> tracks;
  for (const LabeledUtterance& l : labels) {
    if (!cache.contains(l.id)) throw Error(ErrorCode::kSchema, "labels manifest lists '" + l.id + "' missing from the feature cache");
    tracks.push_back(cache.get(l.id));
  }

  ProbeInputs in;
  for (const std::string& name : representations) {
    Representation rep{name, {}};
    if (name == "raw") {
      for (const ProsodyTrack& t : tracks) {
        MatrixXf f(t.num_frames(), 3);
        for (int i = 0; i < t.num_frames(); ++i) {
          f(i, 0) = static_cast<float>(t.pitch(i));
          f(i, 1) = static_cast<float>(t.energy(i));
          f(i, 2) = static_cast<float>(t.vad[static_cast<std::size_t>(i)]);
        }
        rep.frames.push_back(std::move(f));
      }
    } else if (name == "cwt") {
      const FeatureCache cw = open_stage_cache(cfg.out() / kCwtDir);
      for (const LabeledUtterance& l : labels) rep.frames.push_back(cw.get_record(l.id).columns);
    } else {
      const std::string strategy = name.substr(4);
      const fs::path ckpt = checkpoint_path(cfg, strategy);
      if (!fs::exists(ckpt)) {
        if (!tolerate_missing) {
          throw Error(ErrorCode::kMissingArtifact,
                      "checkpoint " + ckpt.string() + " not found; run the train stage for strategy " + strategy);
        }
        in.representations.push_back(std::move(rep));
        continue;
      }
      const MpmCheckpoint ck = load_checkpoint(ckpt);
      const MpmModel<float> model = load_model(ck);
      in.checkpoint_hashes[name] = hash_hex(ckpt);
      in.encoder_hashes[name] = parameter_hash(model);
      for (const ProsodyTrack& t : tracks) rep.frames.push_back(extract_representations(model, tokenize(t, ck.codebooks)));
    }
    in.representations.push_back(std::move(rep));
  }

  for (const std::string& name : cfg.tasks) {
    ProbeTask task;
    task.name = name;
    if (name == "utterance_class" || name == "permuted_class") {
      task.granularity = Granularity::kUtterance;
      int max_label = 1;
      for (const LabeledUtterance& l : labels) max_label = std::max(max_label, l.utterance_label);
      task.num_classes = cfg.corpus.kind == CorpusSource::Kind::kSynthetic
                             ? static_cast<int>(cfg.corpus.synthetic.classes.size())
                             : max_label + 1;
      for (const LabeledUtterance& l : labels) {
        task.labels.push_back(l.utterance_label >= 0 ? std::vector<int>{l.utterance_label} : std::vector<int>{});
      }
      if (name == "permuted_class") {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < task.labels.size(); ++i) {
          if (!task.labels[i].empty()) idx.push_back(i);
        }
        std::vector<int> values;
        for (std::size_t i : idx) values.push_back(task.labels[i][0]);
        Rng rng(mix_seed(cfg.seed, fnv1a64("permuted_class")));
        for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng() % i]);
        for (std::size_t k = 0; k < idx.size(); ++k) task.labels[idx[k]][0] = values[k];
      }
    } else if (name == "pulse") {
      task.granularity = Granularity::kFrame;
      for (std::size_t u = 0; u < labels.size(); ++u) {
        const Flags& f = labels[u].frame_labels;
        if (static_cast<int>(f.size()) == tracks[u].num_frames()) {
          task.labels.emplace_back(f.begin(), f.end());
        } else {
          task.labels.emplace_back();
        }
        task.syllable_counts.push_back(labels[u].syllable_count);
      }
    } else {
      task.granularity = Granularity::kSpan;
      const bool prominence = name == "prominence";
      for (const LabeledUtterance& l : labels) {
        std::vector<int> ys;
        std::vector<FrameSpan> spans;
        for (const WordLabel& w : l.words) {
          const int y = prominence ? w.prominence : w.boundary;
          if (y < 0) continue;
          ys.push_back(y);
          spans.push_back(w.span);
        }
        task.labels.push_back(std::move(ys));
        task.spans.push_back(std::move(spans));
      }
    }
    in.tasks.push_back(std::move(task));
  }
  return in;
}

namespace {

GridConfig grid_config(const ExperimentConfig& cfg) {
  GridConfig g;
  g.probes = cfg.probe.kinds;
  g.folds = cfg.probe.folds;
  g.seeds = cfg.probe.seeds;
  g.conformer = cfg.probe.conformer;
  g.train = cfg.probe.train;
  g.workers = workers_for(cfg);
  return g;
}

// Reloads each checkpoint and compares its parameters with those the
// representations were extracted from.
bool encoders_unchanged(const ExperimentConfig& cfg, const ProbeInputs& in) {
  for (const auto& [name, h] : in.encoder_hashes) {
    const fs::path ckpt = checkpoint_path(cfg, name.substr(4));
    if (hash_hex(ckpt) != in.checkpoint_hashes.at(name)) return false;
    if (parameter_hash(load_model(load_checkpoint(ckpt))) != h) return false;
  }
  return true;
}

void stamp_provenance(EvalReport& report, const ExperimentConfig& cfg, const ProbeInputs& in) {
  const std::string ch = cfg.hash();
  for (EvalRow& r : report.rows) {
    r.config_hash = ch;
    auto it = in.checkpoint_hashes.find(r.representation);
    r.checkpoint_hash = it == in.checkpoint_hashes.end() ? "-" : it->second;
  }
}

std::string provenance_footer(const ExperimentConfig& cfg, const ProbeInputs& in) {
  std::string s = "\nconfig " + cfg.hash() + "\n";
  for (const auto& [name, h] : in.checkpoint_hashes) s += "checkpoint " + name + " " + h + "\n";
  return s;
}

}  // namespace

EvalReport cmd_probe(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const std::string stage = "probe";
  const ProbeInputs in = build_probe_inputs(cfg, cfg.representations, false);
  EvalReport report = run_probe_grid(in.representations, in.tasks, grid_config(cfg));
  stamp_provenance(report, cfg, in);
  const bool frozen = encoders_unchanged(cfg, in);
  if (!frozen) throw Error(ErrorCode::kFormat, "encoder parameters changed during probing");

  report.save((cfg.out() / "report.tsv").string());
  write_text(cfg.out() / "summary.txt", report.summary_table() + provenance_footer(cfg, in));

  RunManifest manifest = RunManifest::open(cfg);
  manifest.drop_stage_artifacts(stage);
  manifest.record_artifact(cfg, "report.tsv", stage);
  manifest.record_artifact(cfg, "summary.txt", stage);
  Json details{{"rows", report.rows.size()}, {"absent_cells", report.absent_cells()}, {"encoder_frozen", frozen}};
  manifest.stages[stage] = {report.absent_cells() == 0 ? "ok" : "partial", seconds_since(t0), details};
  manifest.save(cfg);
  return report;
}

// ---- sweep ----

bool paired_protocol(const EvalReport& report) {
  std::map<std::string, std::set<Cell>> cells;
  for (const EvalRow& r : report.rows) cells[r.representation].insert({r.task, r.probe, r.fold, r.seed});
  for (const auto& [name, c] : cells) {
    if (c != cells.begin()->second) return false;
  }
  return true;
}

SweepOutcome cmd_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const std::string stage = "sweep";
  SweepOutcome out;
  std::map<std::string, std::string> failures;
  for (const std::string& s : cfg.strategies) {
    const auto ts = Clock::now();
    try {
      cmd_train(cfg, s);
    } catch (const std::exception& e) {
      warn("strategy " + s + " failed: " + e.what());
      out.failed_strategies.push_back(s);
      failures["mpm:" + s] = e.what();
      RunManifest m = RunManifest::open(cfg);
      m.drop_stage_artifacts("train:" + s);
      m.stages["train:" + s] = {"failed", seconds_since(ts), Json{{"error", e.what()}}};
      m.save(cfg);
    }
  }

  std::vector<std::string> reps;
  for (const char* base : {"raw", "cwt"}) {
    if (std::find(cfg.representations.begin(), cfg.representations.end(), base) != cfg.representations.end()) {
      reps.push_back(base);
    }
  }
  for (const std::string& s : cfg.strategies) {
    if (!failures.count("mpm:" + s)) reps.push_back("mpm:" + s);
  }
  ProbeInputs in = build_probe_inputs(cfg, reps, true);
  std::vector<Representation> ordered;
  std::size_t next = 0;
  for (const Representation& r : in.representations) {
    if (r.name.rfind("mpm:", 0) == 0) break;
    ordered.push_back(r);
    ++next;
  }
  for (const std::string& s : cfg.strategies) {
    if (failures.count("mpm:" + s)) {
      ordered.push_back({"mpm:" + s, {}});
    } else {
      ordered.push_back(std::move(in.representations[next++]));
    }
  }
  in.representations = std::move(ordered);
  out.report = run_probe_grid(in.representations, in.tasks, grid_config(cfg));
  stamp_provenance(out.report, cfg, in);
  for (EvalRow& r : out.report.rows) {
    auto f = failures.find(r.representation);
    if (f != failures.end()) r.note = "training failed: " + f->second;
  }
  const bool frozen = encoders_unchanged(cfg, in);
  if (!frozen) throw Error(ErrorCode::kFormat, "encoder parameters changed during probing");
  const bool paired = paired_protocol(out.report);
  if (!paired) throw Error(ErrorCode::kSchema, "sweep cells are not paired across representations");

  out.report.save((cfg.out() / "sweep_report.tsv").string());
  write_text(cfg.out() / "sweep_summary.txt", out.report.summary_table() + provenance_footer(cfg, in));

  RunManifest manifest = RunManifest::open(cfg);
  manifest.drop_stage_artifacts(stage);
  manifest.record_artifact(cfg, "sweep_report.tsv", stage);
  manifest.record_artifact(cfg, "sweep_summary.txt", stage);
  Json details{{"rows", out.report.rows.size()},
               {"absent_cells", out.report.absent_cells()},
               {"failed_strategies", out.failed_strategies},
               {"paired", paired},
               {"encoder_frozen", frozen}};
  manifest.stages[stage] = {out.exit_code() == 0 ? "ok" : "partial", seconds_since(t0), details};
  manifest.save(cfg);
  return out;
}

// ---- report ----

std::vector<fs::path> cmd_report(const fs::path& report_path, const fs::path& out_dir, const fs::path& log_dir) {
  const EvalReport report = EvalReport::load(report_path.string());
  const std::vector<AggregateRow> agg = report.aggregate();
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  std::vector<std::string> tasks;
  std::vector<std::pair<std::string, std::string>> lines;  // (representation, probe)
  for (const EvalRow& r : report.rows) {
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    std::pair<std::string, std::string> key{r.representation, r.probe};
    if (std::find(lines.begin(), lines.end(), key) == lines.end()) lines.push_back(key);
  }
  auto find = [&](const std::string& rep, const std::string& probe, const std::string& task,
                  const std::string& metric) -> const AggregateRow* {
    for (const AggregateRow& a : agg) {
      if (a.representation == rep && a.probe == probe && a.task == task && a.metric == metric) return &a;
    }
    return nullptr;
  };

  std::ostringstream md;
  md << "# " << report_path.filename().string() << "\n";
  for (const std::string& task : tasks) {
    std::vector<std::string> metrics;
    for (const std::string& m : metric_names()) {
      for (const AggregateRow& a : agg) {
        if (a.task == task && a.metric == m && a.count > 0) {
          metrics.push_back(m);
          break;
        }
      }
    }
    if (metrics.empty()) metrics = metric_names();
    md << "\n## " << task << "\n\n| representation | probe |";
    for (const std::string& m : metrics) md << ' ' << m << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < metrics.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& [rep, probe] : lines) {
      bool any = false;
      for (const EvalRow& r : report.rows) any = any || (r.representation == rep && r.probe == probe && r.task == task);
      if (!any) continue;
      md << "| " << rep << " | " << probe << " |";
      for (const std::string& m : metrics) {
        const AggregateRow* a = find(rep, probe, task, m);
        md << ' ' << (a ? report_cell(*a) : std::string("--")) << " |";
      }
      md << '\n';
    }
  }
  md << "\nCells show mean +- sample std over folds and seeds. \"--\" marks an undefined metric; "
        "\"absent\" and \"*\" mark cells that failed to run.\n";
  write_text(out_dir / "tables.md", md.str());
  written.push_back(out_dir / "tables.md");

  // Metric against mask size, one chart per task.
  std::vector<std::string> strategies;
  for (const auto& [rep, probe] : lines) {
    const std::string s = strategy_of(rep);
    if (s != "-" && std::find(strategies.begin(), strategies.end(), s) == strategies.end()) strategies.push_back(s);
  }
  std::stable_sort(strategies.begin(), strategies.end(), [](const std::string& a, const std::string& b) {
    const bool ra = a == "random", rb = b == "random";
    if (ra != rb) return rb;
    if (ra) return false;
    return std::stoi(a) < std::stoi(b);
  });
  if (!strategies.empty()) {
    for (const std::string& task : tasks) {
      std::string metric = "f1";
      bool has_f1 = false;
      for (const AggregateRow& a : agg) has_f1 = has_f1 || (a.task == task && a.metric == "f1" && a.count > 0);
      if (!has_f1) metric = "wa";
      PlotSpec spec;
      spec.title = task + ": " + metric + " vs mask size";
      spec.x_label = "mask size";
      spec.y_label = metric;
      spec.x_categories = strategies;
      std::vector<PlotSeries> series;
      std::vector<std::string> probes;
      for (const auto& [rep, probe] : lines) {
        if (std::find(probes.begin(), probes.end(), probe) == probes.end()) probes.push_back(probe);
      }
      for (const std::string& probe : probes) {
        PlotSeries s{"mpm (" + probe + ")", {}, {}, false};
        for (std::size_t i = 0; i < strategies.size(); ++i) {
          const AggregateRow* a = find("mpm:" + strategies[i], probe, task, metric);
          s.x.push_back(static_cast<double>(i));
          s.y.push_back(a && a->count > 0 ? a->mean : kMissing);
        }
        series.push_back(s);
        for (const char* base : {"raw", "cwt"}) {
          const AggregateRow* a = find(base, probe, task, metric);
          if (!a || a->count == 0) continue;
          series.push_back({std::string(base) + " (" + probe + ")",
                            {0.0, static_cast<double>(strategies.size() - 1)},
                            {a->mean, a->mean},
                            true});
        }
      }
      const fs::path p = out_dir / ("metric_vs_mask_" + safe_name(task) + ".svg");
      write_text(p, render_line_plot(spec, series));
      written.push_back(p);
    }
  }

  if (!log_dir.empty() && fs::is_directory(log_dir)) {
    std::vector<fs::path> logs;
    for (const auto& e : fs::directory_iterator(log_dir)) {
      const std::string n = e.path().filename().string();
      if (n.rfind("mpm_", 0) == 0 && n.size() > 8 && n.substr(n.size() - 8) == ".log.tsv") logs.push_back(e.path());
    }
    std::sort(logs.begin(), logs.end());
    if (!logs.empty()) {
      std::vector<PlotSeries> series;
      for (const fs::path& lp : logs) {
        std::ifstream in(lp);
        std::string line;
        std::getline(in, line);
        std::vector<double> steps, losses;
        while (std::getline(in, line)) {
          double step = 0, loss = 0;
          if (std::sscanf(line.c_str(), "%lf\t%lf", &step, &loss) == 2) {
            steps.push_back(step);
            losses.push_back(loss);
          }
        }
        // Mean over windows keeps the chart readable for long runs.
        const std::size_t window = std::max<std::size_t>(1, steps.size() / 200);
        PlotSeries s;
        const std::string n = lp.filename().string();
        s.name = "mpm:" + n.substr(4, n.size() - 12);
        for (std::size_t i = 0; i + window <= steps.size(); i += window) {
          double sum = 0;
          for (std::size_t k = i; k < i + window; ++k) sum += losses[k];
          s.x.push_back(steps[i + window - 1]);
          s.y.push_back(sum / static_cast<double>(window));
        }
        series.push_back(std::move(s));
      }
      PlotSpec spec{"MPM training loss", "step", "normalized loss", {}, 640, 400};
      const fs::path p = out_dir / "loss_curves.svg";
      write_text(p, render_line_plot(spec, series));
      written.push_back(p);
    }
  }
  return written;
}

void record_report_artifacts(const ExperimentConfig& cfg, const std::vector<fs::path>& written, double seconds) {
  if (!fs::exists(cfg.out() / RunManifest::kFileName)) return;
  const fs::path root = fs::weakly_canonical(cfg.out());
  RunManifest manifest = RunManifest::open(cfg);
  manifest.drop_stage_artifacts("report");
  for (const fs::path& p : written) {
    const fs::path rel = fs::weakly_canonical(p).lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") continue;
    manifest.record_artifact(cfg, rel, "report");
  }
  manifest.stages["report"] = {"ok", seconds, Json{{"files", written.size()}}};
  manifest.save(cfg);
}

// ---- synth ----

void cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.corpus.synthetic.validate();
  const SynthCorpus corpus = generate_synthetic_corpus(cfg.corpus.synthetic);
  FeatureCache cache(out_dir);
  for (std::size_t i = 0; i < corpus.tracks.size(); ++i) cache.put(corpus.labels[i].id, corpus.tracks[i]);
  cache.save_manifest();
  save_labels_manifest((out_dir / kLabelsFile).string(), corpus.labels);
  write_text(out_dir / "synth_config.json", Json(cfg.corpus.synthetic).dump(2) + "\n");
}

}  // namespace mpm
