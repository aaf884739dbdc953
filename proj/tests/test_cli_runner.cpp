#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "mpm/error.hpp"
#include "mpm/experiment.hpp"
#include "mpm/hash.hpp"
#include "mpm/log.hpp"
#include "test_util.hpp"

using namespace mpm;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::desk();
  c.output_dir = out.string();
  c.deterministic = true;
  c.corpus.synthetic.num_utterances = 10;
  c.model.num_layers = 1;
  c.model.model_dim = 16;
  c.model.feedforward_dim = 32;
  c.train.steps = 50;
  c.train.batch_size = 4;
  c.train.warmup_steps = 5;
  c.train.log_every = 10;
  c.strategies = {"4", "random"};
  c.representations = {"raw", "mpm:4"};
  c.tasks = {"utterance_class", "pulse"};
  c.probe.folds = 2;
  c.probe.seeds = {0};
  c.probe.train.steps = 60;
  c.probe.train.warmup_steps = 6;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mpm::Error");
  return ErrorCode::kFormat;
}

// A voiced, syllable-like waveform: 150 Hz harmonic tone with a 4 Hz envelope.
Waveform voiced(double seconds) {
  Waveform w = test::sine(150.0, seconds);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double t = static_cast<double>(i) / w.sample_rate;
    w.samples[i] *= 0.6 + 0.4 * std::sin(2.0 * 3.141592653589793 * 4.0 * t);
  }
  return w;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(MPM_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("desk config validates and survives a JSON round trip") {
  const ExperimentConfig c = ExperimentConfig::desk();
  CHECK_NOTHROW(c.validate());
  ExperimentConfig back;
  from_json(Json(c), back);
  CHECK(Json(back) == Json(c));
  CHECK(back.hash() == c.hash());
}

TEST_CASE("config hash ignores the output location") {
  ExperimentConfig a = ExperimentConfig::desk(), b = a;
  b.output_dir = "elsewhere";
  b.deterministic = true;
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("config file with partial keys keeps defaults") {
  test::TempDir dir("cfg");
  std::ofstream(dir / "c.json") << R"({"seed": 5, "train": {"steps": 700}, "corpus": {"synthetic": {"seed": 3}}})";
  const ExperimentConfig c = load_experiment_config((dir / "c.json").string());
  CHECK(c.seed == 5);
  CHECK(c.train.steps == 700);
  CHECK(c.corpus.synthetic.seed == 3);
  CHECK(c.train.batch_size == ExperimentConfig::desk().train.batch_size);
}

TEST_CASE("config errors") {
  test::TempDir dir("cfgerr");
  auto load = [&](const std::string& text) {
    std::ofstream(dir / "c.json") << text;
    return load_experiment_config((dir / "c.json").string());
  };
  CHECK(code_of([&] { load(R"({"sed": 1})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"model": {"layers": 1}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"strategies": []})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"tasks": []})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"representations": []})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"strategies": ["4"], "representations": ["mpm:16"]})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"tasks": ["emotion"]})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load(R"({"corpus": {"source": "tape"}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load("{not json"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { load_experiment_config((dir / "missing.json").string()); }) == ErrorCode::kMissingArtifact);
}

TEST_CASE("synthetic features record the generator seed and regenerate exactly") {
  test::TempDir dir("feat");
  ExperimentConfig c = tiny(dir.path());
  c.corpus.synthetic.seed = 11;
  const FeaturesOutcome o = cmd_features(c);
  CHECK(o.computed == 10);
  CHECK(o.exit_code() == 0);

  std::ifstream in(dir / "manifest.json");
  const Json m = Json::parse(in);
  CHECK(m.at("config_hash") == c.hash());
  const auto seed = m.at("stages").at("features").at("details").at("generator_seed").get<std::uint64_t>();
  CHECK(seed == 11);

  SynthConfig sc = c.corpus.synthetic;
  sc.seed = seed;
  const SynthCorpus again = generate_synthetic_corpus(sc);
  const FeatureCache cache = FeatureCache::open(dir / "features");
  REQUIRE(cache.entries().size() == again.tracks.size());
  for (std::size_t i = 0; i < again.tracks.size(); ++i) {
    const FeatureRecord a = cache.get_record(again.labels[i].id);
    const FeatureRecord b = to_record(again.labels[i].id, again.tracks[i]);
    CHECK(a.columns == b.columns);
    CHECK(a.vad == b.vad);
  }

  // Every produced file is listed with its hash.
  std::set<std::string> listed;
  for (const Json& a : m.at("artifacts")) {
    listed.insert(a.at("path").get<std::string>());
    CHECK(a.at("hash") == hex64(hash_file((dir.path() / a.at("path").get<std::string>()).string())));
  }
  for (const char* sub : {"features", "cwt"}) {
    for (const auto& e : fs::directory_iterator(dir / sub)) {
      CHECK(listed.count(fs::relative(e.path(), dir.path()).generic_string()) == 1);
    }
  }
}

TEST_CASE("rerunning features unchanged recomputes nothing") {
  test::TempDir dir("rerun");
  const ExperimentConfig c = tiny(dir.path());
  cmd_features(c);
  const RunManifest first = RunManifest::open(c);
  const std::string cache_manifest = slurp(dir / "features" / "manifest.tsv");
  const FeaturesOutcome o = cmd_features(c);
  CHECK(o.computed == 0);
  CHECK(o.skipped == 10);
  CHECK(RunManifest::open(c).content_hash() == first.content_hash());
  CHECK(slurp(dir / "features" / "manifest.tsv") == cache_manifest);
}

TEST_CASE("directory corpus: labels from side files, unreadable files listed") {
  test::TempDir dir("dir");
  const fs::path corpus = dir / "corpus";
  fs::create_directories(corpus / "actor01");
  save_waveform(corpus / "actor01" / "03-01-05-01-02-01-01.wav", voiced(1.5));
  save_waveform(corpus / "plain.wav", voiced(1.2));
  std::ofstream(corpus / "plain.phn") << "0 3200 h#\n3200 6400 aa\n6400 8000 s\n8000 11200 iy\n11200 19200 h#\n";
  std::ofstream(corpus / "plain.tobi") << "one\tH*\t1\t0.2\t0.5\ntwo\t_\t4\t0.5\t0.7\n";
  std::ofstream(corpus / "broken.wav") << "not a wav file";

  ExperimentConfig c = tiny(dir / "out");
  c.corpus.kind = CorpusSource::Kind::kDirectory;
  c.corpus.directory = corpus.string();
  c.deterministic = false;
  ScopedWarningCapture warnings;
  const FeaturesOutcome o = cmd_features(c);
  CHECK(o.computed == 2);
  REQUIRE(o.failed.size() == 1);
  CHECK(o.failed[0].find("broken.wav") != std::string::npos);
  CHECK(o.exit_code() == 2);

  const auto labels = load_labels_manifest((dir / "out" / "features" / "labels.tsv").string(), Provenance::kReal);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].id == "actor01/03-01-05-01-02-01-01");
  CHECK(labels[0].utterance_label == 4);
  CHECK(labels[0].speaker == 1);
  CHECK(labels[1].id == "plain");
  CHECK(labels[1].utterance_label == -1);
  CHECK(labels[1].syllable_count == 2);
  REQUIRE(labels[1].frame_labels.size() == 120);
  CHECK(labels[1].frame_labels[25] == 1);
  CHECK(labels[1].frame_labels[45] == 0);
  CHECK(labels[1].frame_labels[55] == 1);
  REQUIRE(labels[1].words.size() == 2);
  CHECK(labels[1].words[0].span == FrameSpan{20, 50});
  CHECK(labels[1].words[0].prominence == 1);
  CHECK(labels[1].words[1].span == FrameSpan{50, 70});
  CHECK(labels[1].words[1].boundary == 1);

  std::ifstream in(dir / "out" / "manifest.json");
  const Json m = Json::parse(in);
  CHECK(m.at("stages").at("features").at("status") == "partial");

  // The failing file is retried; the readable ones come from the cache.
  const FeaturesOutcome again = cmd_features(c);
  CHECK(again.computed == 0);
  CHECK(again.skipped == 2);
  CHECK(again.failed.size() == 1);
}

TEST_CASE("empty corpus is an error") {
  test::TempDir dir("empty");
  fs::create_directories(dir / "corpus");
  ExperimentConfig c = tiny(dir / "out");
  c.corpus.kind = CorpusSource::Kind::kDirectory;
  c.corpus.directory = (dir / "corpus").string();
  CHECK(code_of([&] { cmd_features(c); }) == ErrorCode::kEmptyInput);
  c.corpus.directory = (dir / "nowhere").string();
  CHECK(code_of([&] { cmd_features(c); }) == ErrorCode::kMissingArtifact);
}

TEST_CASE("smoke training completes and lowers the loss") {
  test::TempDir dir("smoke");
  const ExperimentConfig c = tiny(dir.path());
  cmd_features(c);
  const TrainResult r = cmd_train(c, "4");
  REQUIRE(r.step_losses.size() == 50);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) {
    head += r.step_losses[static_cast<std::size_t>(i)];
    tail += r.step_losses[static_cast<std::size_t>(40 + i)];
  }
  CHECK(tail < head);
  CHECK(fs::exists(checkpoint_path(c, "4")));
  const std::string log = slurp(train_log_path(c, "4"));
  CHECK(log.rfind("step\tloss\tmasked_accuracy\tmask_length\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 51);
}

TEST_CASE("training twice with one seed gives byte-identical checkpoints") {
  test::TempDir a("det_a"), b("det_b");
  const ExperimentConfig ca = tiny(a.path()), cb = tiny(b.path());
  cmd_features(ca);
  cmd_features(cb);
  cmd_train(ca, "random");
  cmd_train(cb, "random");
  CHECK(slurp(checkpoint_path(ca, "random")) == slurp(checkpoint_path(cb, "random")));
  CHECK(slurp(train_log_path(ca, "random")) == slurp(train_log_path(cb, "random")));
}

TEST_CASE("random strategy logs per-batch mask lengths within 1..128") {
  test::TempDir dir("rand");
  const ExperimentConfig c = tiny(dir.path());
  cmd_features(c);
  cmd_train(c, "random");
  std::ifstream in(train_log_path(c, "random"));
  std::string line;
  std::getline(in, line);
  std::set<int> seen;
  int rows = 0;
  while (std::getline(in, line)) {
    const int m = std::stoi(line.substr(line.rfind('\t') + 1));
    CHECK(m >= 1);
    CHECK(m <= 128);
    seen.insert(m);
    ++rows;
  }
  CHECK(rows == 50);
  CHECK(seen.size() > 10);
}

TEST_CASE("training an unlisted strategy is a config error") {
  test::TempDir dir("unlisted");
  const ExperimentConfig c = tiny(dir.path());
  CHECK(code_of([&] { cmd_train(c, "16"); }) == ErrorCode::kConfig);
}

TEST_CASE("missing artifacts name the stage to run") {
  test::TempDir dir("missing");
  const ExperimentConfig c = tiny(dir.path());
  try {
    cmd_probe(c);
    FAIL("expected a missing-artifact error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingArtifact);
    CHECK(std::string(e.what()).find("features stage") != std::string::npos);
  }
  CHECK(code_of([&] { cmd_train(c, "4"); }) == ErrorCode::kMissingArtifact);
  cmd_features(c);
  try {
    cmd_probe(c);
    FAIL("expected a missing-artifact error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingArtifact);
    CHECK(std::string(e.what()).find("train stage for strategy 4") != std::string::npos);
  }
}

TEST_CASE("probe grid of 2 representations, 2 tasks, 2 probes and 5 folds has 40 rows") {
  test::TempDir dir("grid");
  ExperimentConfig c = tiny(dir.path());
  c.corpus.synthetic.num_utterances = 20;
  c.probe.folds = 5;
  c.probe.kinds = {ProbeKind::kLinear, ProbeKind::kConformer};
  c.probe.conformer.conformer_dim = 8;
  c.probe.conformer.conformer_blocks = 1;
  c.probe.conformer.conformer_heads = 2;
  c.probe.conformer.conformer_feedforward_dim = 16;
  c.probe.train.steps = 20;
  c.probe.train.warmup_steps = 2;
  cmd_features(c);
  cmd_train(c, "4");
  const EvalReport r = cmd_probe(c);
  CHECK(r.rows.size() == 40);
  CHECK(r.absent_cells() == 0);

  const std::string ckpt_hash = hex64(hash_file(checkpoint_path(c, "4").string()));
  for (const EvalRow& row : r.rows) {
    CHECK(row.config_hash == c.hash());
    CHECK(row.checkpoint_hash == (row.representation == "mpm:4" ? ckpt_hash : "-"));
  }

  const EvalReport back = EvalReport::load((dir.path() / "report.tsv").string());
  const auto a = r.aggregate(), b = back.aggregate();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].count == b[i].count);
    CHECK((a[i].mean == b[i].mean || (std::isnan(a[i].mean) && std::isnan(b[i].mean))));
    CHECK((a[i].stddev == b[i].stddev || (std::isnan(a[i].stddev) && std::isnan(b[i].stddev))));
  }

  std::ifstream in(dir / "manifest.json");
  const Json m = Json::parse(in);
  CHECK(m.at("stages").at("probe").at("details").at("encoder_frozen") == true);
  CHECK(slurp(dir / "summary.txt").find("checkpoint mpm:4 " + ckpt_hash) != std::string::npos);
}

TEST_CASE("permuted-label control sits at chance") {
  test::TempDir dir("perm");
  ExperimentConfig c = tiny(dir.path());
  c.corpus.synthetic.num_utterances = 200;
  c.representations = {"raw", "cwt"};
  c.tasks = {"permuted_class"};
  c.probe.folds = 5;
  c.probe.seeds = {0, 1};
  c.probe.train.steps = 300;
  cmd_features(c);
  const EvalReport r = cmd_probe(c);
  for (const AggregateRow& a : r.aggregate()) {
    if (a.metric != "wa") continue;
    // Four balanced classes; 10 folds of 40 give a standard error near 0.02.
    CHECK(std::abs(a.mean - 0.25) < 0.1);
  }
}

TEST_CASE("sweep trains every strategy and isolates failures") {
  test::TempDir dir("sweep");
  ExperimentConfig c = tiny(dir.path());
  c.strategies = {"4", "16", "128", "random"};
  c.representations = {"raw", "mpm:4"};
  c.train.steps = 10;
  cmd_features(c);
  // A directory where the checkpoint file should go makes one strategy fail.
  fs::create_directories(checkpoint_path(c, "16"));
  const SweepOutcome s = cmd_sweep(c);
  CHECK(s.failed_strategies == std::vector<std::string>{"16"});
  CHECK(s.exit_code() == 2);
  CHECK(paired_protocol(s.report));
  std::map<std::string, int> rows, absent;
  for (const EvalRow& r : s.report.rows) {
    ++rows[r.representation];
    if (!r.present) ++absent[r.representation];
    if (r.representation == "mpm:16") CHECK(r.note.find("training failed") == 0);
  }
  CHECK(rows.size() == 5);
  for (const auto& [rep, n] : rows) CHECK(n == 4);
  CHECK(absent["mpm:16"] == 4);
  CHECK(absent.size() == 1);
  for (const char* st : {"4", "128", "random"}) CHECK(fs::is_regular_file(checkpoint_path(c, st)));

  const EvalReport merged = EvalReport::load((dir.path() / "sweep_report.tsv").string());
  CHECK(merged.rows.size() == s.report.rows.size());

  fs::remove_all(checkpoint_path(c, "16"));
  const SweepOutcome ok = cmd_sweep(c);
  CHECK(ok.failed_strategies.empty());
  CHECK(ok.exit_code() == 0);
  int ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) ckpts += e.path().extension() == ".ckpt";
  CHECK(ckpts == 4);
}

TEST_CASE("paired protocol check notices a missing cell") {
  EvalReport r;
  for (const char* rep : {"raw", "mpm:4"}) {
    for (int f = 0; f < 2; ++f) {
      EvalRow row;
      row.representation = rep;
      row.task = "t";
      row.probe = "linear";
      row.fold = f;
      r.rows.push_back(row);
    }
  }
  CHECK(paired_protocol(r));
  r.rows.back().seed = 9;
  CHECK_FALSE(paired_protocol(r));
}

TEST_CASE("end-to-end reports match across runs and worker counts") {
  test::TempDir a("e2e_a"), b("e2e_b");
  ExperimentConfig ca = tiny(a.path()), cb = tiny(b.path());
  cb.deterministic = false;
  for (ExperimentConfig* c : {&ca, &cb}) {
    cmd_features(*c);
    cmd_train(*c, "4");
  }
  setenv("MPM_WORKERS", "3", 1);
  cmd_probe(ca);
  cmd_probe(cb);
  unsetenv("MPM_WORKERS");
  CHECK(slurp(a / "report.tsv") == slurp(b / "report.tsv"));
}

namespace {

EvalRow cell(const std::string& rep, const std::string& task, int fold, double wa) {
  EvalRow r;
  r.representation = rep;
  r.strategy = strategy_of(rep);
  r.task = task;
  r.probe = "linear";
  r.fold = fold;
  r.wa = wa;
  r.ua = wa;
  return r;
}

std::vector<std::string> table_rows(const std::string& md) {
  std::vector<std::string> rows;
  std::istringstream in(md);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("| ", 0) == 0 && line.rfind("| representation", 0) != 0) rows.push_back(line);
  }
  return rows;
}

}  // namespace

TEST_CASE("report of a single cell is a single-row table") {
  test::TempDir dir("rep1");
  EvalReport r;
  r.rows.push_back(cell("raw", "utterance_class", 0, 0.625));
  r.save((dir / "r.tsv").string());
  const auto written = cmd_report(dir / "r.tsv", dir / "view");
  CHECK(written.size() == 1);
  const auto rows = table_rows(slurp(dir / "view" / "tables.md"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == "| raw | linear | 0.6250 | 0.6250 |");
}

TEST_CASE("report shows gaps and absent cells explicitly and keeps values") {
  test::TempDir dir("rep2");
  EvalReport r;
  const double v[3] = {0.7123456789, 0.6502, 0.8};
  for (int f = 0; f < 3; ++f) r.rows.push_back(cell("mpm:4", "utterance_class", f, v[f]));
  EvalRow pulse = cell("mpm:4", "pulse", 0, 0.5);
  pulse.f1 = 0.25;
  r.rows.push_back(pulse);
  EvalRow gone = cell("mpm:128", "utterance_class", 0, kMissing);
  gone.ua = kMissing;
  gone.present = false;
  r.rows.push_back(gone);
  r.save((dir / "r.tsv").string());
  const auto written = cmd_report(dir / "r.tsv", dir / "view");
  CHECK(fs::exists(dir / "view" / "metric_vs_mask_utterance_class.svg"));
  CHECK(fs::exists(dir / "view" / "metric_vs_mask_pulse.svg"));
  CHECK(written.size() == 3);
  const auto rows = table_rows(slurp(dir / "view" / "tables.md"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == "| mpm:128 | linear | absent | absent |");
  CHECK(rows[2] == "| mpm:4 | linear | 0.5000 | 0.5000 | 0.2500 |");

  // Displayed mean equals the report's aggregate to display precision.
  double shown = 0, sd = 0;
  REQUIRE(std::sscanf(rows[0].c_str(), "| mpm:4 | linear | %lf +- %lf", &shown, &sd) == 2);
  for (const AggregateRow& a : r.aggregate()) {
    if (a.representation == "mpm:4" && a.task == "utterance_class" && a.metric == "wa") {
      CHECK(std::abs(shown - a.mean) <= 5e-5);
      CHECK(std::abs(sd - a.stddev) <= 5e-5);
    }
  }
}

TEST_CASE("report rejects a malformed file") {
  test::TempDir dir("rep3");
  std::ofstream(dir / "bad.tsv") << "representation\ttask\nraw\tx\n";
  CHECK(code_of([&] { cmd_report(dir / "bad.tsv", dir / "view"); }) == ErrorCode::kSchema);
  CHECK(code_of([&] { cmd_report(dir / "none.tsv", dir / "view"); }) == ErrorCode::kMissingArtifact);
}

TEST_CASE("loss curves are drawn from training logs") {
  test::TempDir dir("rep4");
  fs::create_directories(dir / "checkpoints");
  std::ofstream(dir / "checkpoints" / "mpm_4.log.tsv") << "step\tloss\tmasked_accuracy\tmask_length\n1\t3.1\t0\t4\n2\t2.9\t0\t4\n";
  EvalReport r;
  r.rows.push_back(cell("mpm:4", "utterance_class", 0, 0.5));
  r.save((dir / "r.tsv").string());
  cmd_report(dir / "r.tsv", dir / "view", dir / "checkpoints");
  const std::string svg = slurp(dir / "view" / "loss_curves.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("mpm:4") != std::string::npos);
}

TEST_CASE("synth writes a cache and labels") {
  test::TempDir dir("synth");
  ExperimentConfig c = tiny(dir.path());
  cmd_synth(c, dir / "corpus");
  const FeatureCache cache = FeatureCache::open(dir / "corpus");
  CHECK(cache.entries().size() == 10);
  CHECK(load_labels_manifest((dir / "corpus" / "labels.tsv").string()).size() == 10);
  CHECK(fs::exists(dir / "corpus" / "synth_config.json"));
}

TEST_CASE("command line exit codes") {
  test::TempDir dir("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("features --config " + (dir / "none.json").string()) == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("train --out " + (dir / "x").string()) == 1);

  const fs::path corpus = dir / "corpus";
  fs::create_directories(corpus);
  save_waveform(corpus / "a.wav", voiced(1.0));
  std::ofstream(corpus / "b.wav") << "junk";
  ExperimentConfig c = tiny(dir / "out");
  c.corpus.kind = CorpusSource::Kind::kDirectory;
  c.corpus.directory = corpus.string();
  save_experiment_config((dir / "c.json").string(), c);
  CHECK(run_cli("features --config " + (dir / "c.json").string()) == 2);
  fs::remove(corpus / "b.wav");
  CHECK(run_cli("features --config " + (dir / "c.json").string()) == 0);
  CHECK(run_cli("features --config " + (dir / "c.json").string() + " --out " + (dir / "other").string()) == 0);
  CHECK(fs::exists(dir / "other" / "manifest.json"));
}
