#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mpm/error.hpp"
#include "mpm/labels.hpp"
#include "mpm/log.hpp"
#include "mpm/metrics.hpp"
#include "mpm/parsers.hpp"
#include "mpm/synth.hpp"

using namespace mpm;

namespace {

std::string fixture(const std::string& name) { return std::string(MPM_FIXTURE_DIR) + "/" + name; }

template <typename Fn>
Error error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an mpm::Error");
  return Error(ErrorCode::kIo, "");
}

Flags flags_between(int n, std::initializer_list<std::pair<int, int>> runs) {
  Flags f(static_cast<std::size_t>(n), 0);
  for (auto [a, b] : runs) {
    for (int i = a; i < b; ++i) f[static_cast<std::size_t>(i)] = 1;
  }
  return f;
}

}  // namespace

TEST_SUITE("timit") {
  TEST_CASE("single vowel") {
    const TimitAlignment a = parse_timit_alignment_file(fixture("timit_single_vowel.phn"));
    CHECK(a.syllable_count == 1);
    CHECK(a.vowel_frames == flags_between(50, {{20, 30}}));
  }

  TEST_CASE("hand-written three-vowel fixture") {
    const TimitAlignment a = parse_timit_alignment_file(fixture("timit_three_vowels.phn"));
    CHECK(a.phones.size() == 8);
    CHECK(a.syllable_count == 3);
    CHECK(a.vowel_frames == flags_between(60, {{15, 25}, {30, 40}, {45, 55}}));
  }

  TEST_CASE("boundaries off the frame grid") {
    std::istringstream in("0 2450 sil\n2450 4010 iy\n4010 4800 sil\n");
    const TimitAlignment a = parse_timit_alignment(in);
    CHECK(a.vowel_frames == flags_between(30, {{16, 26}}));
  }

  TEST_CASE("empty transcription") {
    const TimitAlignment a = parse_timit_alignment_file(fixture("timit_empty.phn"));
    CHECK(a.syllable_count == 0);
    CHECK(a.vowel_frames.empty());
  }

  TEST_CASE("vowel inventory is configurable") {
    TimitOptions o;
    o.vowels = {"iy"};
    CHECK(parse_timit_alignment_file(fixture("timit_three_vowels.phn"), o).syllable_count == 1);
  }

  TEST_CASE("non-monotone boundaries name the line") {
    const Error e = error_of([] { parse_timit_alignment_file(fixture("timit_nonmonotone.phn")); });
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    std::istringstream reversed("0 100 h#\n300 200 iy\n");
    CHECK(error_of([&] { parse_timit_alignment(reversed); }).code() == ErrorCode::kParse);
    std::istringstream junk("0 100\n");
    CHECK(error_of([&] { parse_timit_alignment(junk); }).code() == ErrorCode::kParse);
  }

  TEST_CASE("round trip") {
    const TimitAlignment a = parse_timit_alignment_file(fixture("timit_three_vowels.phn"));
    std::stringstream ss;
    write_timit_alignment(ss, a.phones);
    const TimitAlignment b = parse_timit_alignment(ss);
    CHECK(b.phones == a.phones);
    CHECK(b.vowel_frames == a.vowel_frames);
  }
}

TEST_SUITE("tobi") {
  TEST_CASE("accent set and break rules") {
    ScopedWarningCapture capture;
    const auto words = parse_tobi_labels_file(fixture("tobi_words.tsv"));
    REQUIRE(words.size() == 8);
    const std::vector<std::pair<int, int>> expected{{1, 0}, {0, 0}, {0, 0}, {1, 1}, {0, 1}, {1, 0}, {1, 1}, {0, 1}};
    for (std::size_t i = 0; i < words.size(); ++i) {
      CAPTURE(words[i].word);
      CHECK(words[i].prominent == expected[i].first);
      CHECK(words[i].boundary == expected[i].second);
    }
    CHECK(words[1].break_index == 2);
    CHECK(words[3].accents == std::vector<std::string>{"H*", "L*"});
    CHECK(words[4].accents.empty());
    REQUIRE(capture.messages().size() == 1);
    CHECK(capture.messages()[0].find("X*?") != std::string::npos);
  }

  TEST_CASE("every listed accent marks prominence") {
    for (const std::string& a : prominence_accents()) {
      std::istringstream in("w\t" + a + "\t1\n");
      CHECK(parse_tobi_labels(in).at(0).prominent == 1);
    }
    for (int b = 0; b <= 4; ++b) {
      std::istringstream in("w\t_\t" + std::to_string(b) + "\n");
      CHECK(parse_tobi_labels(in).at(0).boundary == (b >= 3 ? 1 : 0));
    }
  }

  TEST_CASE("malformed files") {
    const Error bad = error_of([] { parse_tobi_labels_file(fixture("tobi_bad_break.tsv")); });
    CHECK(bad.code() == ErrorCode::kParse);
    CHECK(std::string(bad.what()).find("line 2") != std::string::npos);
    CHECK(error_of([] { parse_tobi_labels_file(fixture("tobi_missing_field.tsv")); }).code() == ErrorCode::kParse);
    CHECK(error_of([] { parse_tobi_labels_file(fixture("no_such_file.tsv")); }).code() == ErrorCode::kIo);
  }

  TEST_CASE("optional word timing") {
    const auto words = parse_tobi_labels_file(fixture("tobi_timed.tsv"));
    REQUIRE(words.size() == 2);
    CHECK(words[0].start_seconds == 0.12);
    CHECK(words[1].end_seconds == 0.71);
    CHECK(words[1].boundary == 1);
    std::stringstream ss;
    write_tobi_labels(ss, words);
    CHECK(parse_tobi_labels(ss) == words);
    std::istringstream backwards("w\t_\t1\t0.5\t0.2\n");
    CHECK(error_of([&] { parse_tobi_labels(backwards); }).code() == ErrorCode::kParse);
  }

  TEST_CASE("round trip") {
    ScopedWarningCapture capture;
    const auto words = parse_tobi_labels_file(fixture("tobi_words.tsv"));
    std::stringstream ss;
    write_tobi_labels(ss, words);
    CHECK(parse_tobi_labels(ss) == words);
  }
}

TEST_SUITE("ravdess") {
  TEST_CASE("fixture names") {
    std::ifstream in(fixture("ravdess_names.txt"));
    std::vector<RavdessId> ids;
    for (std::string name; std::getline(in, name);) ids.push_back(parse_ravdess_id(name));
    REQUIRE(ids.size() == 3);
    CHECK(ids[0].emotion == 4);
    CHECK(ids[0].speaker == 12);
    CHECK(ids[1].emotion == 0);
    CHECK(ids[1].speaker == 1);
    CHECK(ids[2].emotion == 7);
    CHECK(ids[2].speaker == 24);
  }

  TEST_CASE("directories are ignored") {
    CHECK(parse_ravdess_id("/data/Actor_12/03-01-05-01-02-01-12.wav").speaker == 12);
  }

  TEST_CASE("malformed names") {
    CHECK(error_of([] { parse_ravdess_id("a-b.wav"); }).code() == ErrorCode::kParse);
    CHECK(error_of([] { parse_ravdess_id("03-01-05-01-02-01.wav"); }).code() == ErrorCode::kParse);
    CHECK(error_of([] { parse_ravdess_id("03-01-09-01-02-01-12.wav"); }).code() == ErrorCode::kParse);
    CHECK(error_of([] { parse_ravdess_id("03-01-x5-01-02-01-12.wav"); }).code() == ErrorCode::kParse);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("ser") {
    CHECK(ser({5, 7}, {5, 7}) == 0.0);
    CHECK(std::abs(ser({10}, {8}) - 0.2) <= 1e-12);
    CHECK(std::abs(ser({10, 20}, {8, 25}) - 0.225) <= 1e-12);
    ScopedWarningCapture capture;
    CHECK(std::abs(ser({10, 0}, {8, 3}) - 0.2) <= 1e-12);
    CHECK(capture.messages().size() == 1);
    CHECK(error_of([] { ser({0}, {1}); }).code() == ErrorCode::kEmptyInput);
  }

  TEST_CASE("pearson") {
    const std::vector<double> a{1, 2, 3, 4};
    CHECK(pearson_corr(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pearson_corr(a, {-1, -2, -3, -4}) == doctest::Approx(-1.0).epsilon(1e-15));
    // 11 / sqrt(130), evaluated at 30 digits.
    CHECK(std::abs(pearson_corr(a, {2, 4, 5, 9}) - 0.964763821237732136192) <= 1e-12);
    CHECK(std::abs(pearson_corr({0.5, -1.25, 2.0, 3.5, 0.0}, {1.0, 0.25, -0.5, 2.0, 1.5}) -
                   0.293880157887149290313) <= 1e-12);
    CHECK(error_of([] { pearson_corr({1, 1, 1}, {1, 2, 3}); }).code() == ErrorCode::kUndefinedCorrelation);
    CHECK(error_of([] { pearson_corr({1}, {2}); }).code() == ErrorCode::kTooFewItems);
  }

  TEST_CASE("f1") {
    CHECK(f1_binary({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(f1_binary({0, 0, 0}, {1, 0, 1}) == 0.0);
    // TP 2, FP 1, FN 1.
    CHECK(std::abs(f1_binary({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}) - 2.0 / 3.0) <= 1e-12);
    ScopedWarningCapture capture;
    CHECK(f1_binary({0, 0}, {0, 0}) == 0.0);
    CHECK(capture.messages().size() == 1);
  }

  TEST_CASE("weighted and unweighted accuracy") {
    const Accuracy perfect = weighted_unweighted_accuracy({0, 1, 2}, {0, 1, 2}, 3);
    CHECK(perfect.weighted == 1.0);
    CHECK(perfect.unweighted == 1.0);
    std::vector<int> gold(100, 0), pred(100, 0);
    std::fill(gold.begin() + 90, gold.end(), 1);
    const Accuracy skew = weighted_unweighted_accuracy(pred, gold, 2);
    CHECK(std::abs(skew.weighted - 0.9) <= 1e-12);
    CHECK(std::abs(skew.unweighted - 0.5) <= 1e-12);
    const Accuracy single = weighted_unweighted_accuracy({1, 1, 0, 1}, {1, 1, 1, 1}, 4);
    CHECK(std::abs(single.unweighted - 0.75) <= 1e-12);
    CHECK(error_of([] { weighted_unweighted_accuracy({}, {}, 2); }).code() == ErrorCode::kEmptyInput);
    CHECK(error_of([] { weighted_unweighted_accuracy({2}, {0}, 2); }).code() == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("kfold") {
    const auto f = kfold_split(10, 5, 3);
    for (int k = 0; k < 5; ++k) CHECK(std::count(f.begin(), f.end(), k) == 2);
    CHECK(kfold_split(10, 5, 3) == f);
    CHECK(kfold_split(10, 5, 4) != f);
    for (int n : {5, 23, 101}) {
      const auto g = kfold_split(n, 5, 11);
      CHECK(static_cast<int>(g.size()) == n);
      std::vector<int> sizes(5, 0);
      for (int x : g) {
        REQUIRE(x >= 0);
        REQUIRE(x < 5);
        ++sizes[static_cast<std::size_t>(x)];
      }
      CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
      CHECK(std::accumulate(sizes.begin(), sizes.end(), 0) == n);
    }
    CHECK(error_of([] { kfold_split(4, 5, 0); }).code() == ErrorCode::kTooFewItems);
  }

  TEST_CASE("syllable counting") {
    CHECK(count_syllables_from_frames(std::vector<double>(50, 0.0)) == 0);
    std::vector<double> p(60, 0.0);
    std::fill(p.begin() + 5, p.begin() + 12, 0.9);
    std::fill(p.begin() + 40, p.begin() + 48, 0.8);
    CHECK(count_syllables_from_frames(p) == 2);
    std::fill(p.begin() + 12, p.begin() + 40, 0.0);
    p[14] = 0.7;  // two-frame dip merges with the first run
    CHECK(count_syllables_from_frames(p) == 2);
    p[15] = 0.7;
    p[19] = 0.7;  // gap of exactly three frames separates
    CHECK(count_syllables_from_frames(p) == 3);
    CHECK(count_syllables_from_frames({0.5, 0.5}) == 0);
  }
}

TEST_SUITE("synthetic corpus") {
  TEST_CASE("labels decode from stored parameters") {
    SynthConfig cfg;
    cfg.num_utterances = 60;
    cfg.seed = 5;
    const SynthCorpus c = generate_synthetic_corpus(cfg);
    REQUIRE(c.tracks.size() == 60);
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
      CHECK(decode_synthetic_labels(c.params[i]) == c.labels[i]);
      CHECK(c.tracks[i].num_frames() == static_cast<int>(c.labels[i].frame_labels.size()));
      CHECK(c.tracks[i].pitch.allFinite());
      CHECK(c.tracks[i].energy.allFinite());
      c.labels[i].validate();
    }
  }

  TEST_CASE("nucleus runs count the pulses") {
    SynthConfig cfg;
    cfg.num_utterances = 80;
    const SynthCorpus c = generate_synthetic_corpus(cfg);
    for (const auto& u : c.labels) {
      std::vector<double> p(u.frame_labels.begin(), u.frame_labels.end());
      CHECK(count_syllables_from_frames(p) == u.syllable_count);
    }
  }

  TEST_CASE("twelve-pulse fixture") {
    SynthConfig cfg;
    cfg.num_utterances = 1;
    cfg.min_duration_seconds = cfg.max_duration_seconds = 3.05;
    cfg.min_rate_hz = cfg.max_rate_hz = 4.0;
    cfg.rate_jitter = 0.0;
    cfg.pause_probability = 0.0;
    cfg.edge_silence_seconds = 0.01;
    cfg.classes = {{0.0, 1.0, 1.0}};
    const SynthCorpus c = generate_synthetic_corpus(cfg);
    CHECK(c.labels[0].syllable_count == 12);
    std::vector<double> p(c.labels[0].frame_labels.begin(), c.labels[0].frame_labels.end());
    CHECK(count_syllables_from_frames(p) == 12);
  }

  TEST_CASE("4 Hz for 3 s gives 12 +- 1 syllables") {
    SynthConfig cfg;
    cfg.num_utterances = 30;
    cfg.min_duration_seconds = cfg.max_duration_seconds = 3.0;
    cfg.min_rate_hz = cfg.max_rate_hz = 4.0;
    cfg.pause_probability = 0.0;
    cfg.edge_silence_seconds = 0.01;
    cfg.classes = {{0.0, 1.0, 1.0}};
    for (const auto& u : generate_synthetic_corpus(cfg).labels) {
      CHECK(u.syllable_count >= 11);
      CHECK(u.syllable_count <= 13);
    }
  }

  TEST_CASE("no pauses means no boundaries") {
    SynthConfig cfg;
    cfg.num_utterances = 40;
    cfg.pause_probability = 0.0;
    cfg.classes = {{0.0, 1.0, 1.0}};
    for (const auto& u : generate_synthetic_corpus(cfg).labels) {
      CHECK(u.utterance_label == 0);
      for (const auto& w : u.words) CHECK(w.boundary == 0);
    }
  }

  TEST_CASE("pitch offsets separate two classes by mean pitch") {
    SynthConfig cfg;
    cfg.num_utterances = 300;
    cfg.classes = {{1.0, 1.0, 1.0}, {-1.0, 1.0, 1.0}};
    const SynthCorpus c = generate_synthetic_corpus(cfg);
    std::vector<double> mean_st(c.tracks.size());
    double class_sum[2] = {0, 0};
    int class_n[2] = {0, 0};
    for (std::size_t i = 0; i < c.tracks.size(); ++i) {
      double s = 0;
      int n = 0;
      for (Eigen::Index t = 0; t < c.tracks[i].raw_pitch_hz.size(); ++t) {
        if (c.tracks[i].raw_pitch_hz(t) > 0) {
          s += 12.0 * std::log2(c.tracks[i].raw_pitch_hz(t) / cfg.base_pitch_hz);
          ++n;
        }
      }
      mean_st[i] = s / n;
      const int k = c.labels[i].utterance_label;
      class_sum[k] += mean_st[i];
      ++class_n[k];
    }
    REQUIRE(class_n[0] > 0);
    REQUIRE(class_n[1] > 0);
    // Classes differ only in offset, so the Bayes boundary is the midpoint.
    const double mid = 0.5 * (class_sum[0] / class_n[0] + class_sum[1] / class_n[1]);
    int correct = 0;
    for (std::size_t i = 0; i < mean_st.size(); ++i) {
      correct += ((mean_st[i] > mid ? 0 : 1) == c.labels[i].utterance_label) ? 1 : 0;
    }
    CHECK(correct / 300.0 >= 0.99);
  }

  TEST_CASE("same seed, same corpus") {
    SynthConfig cfg;
    cfg.num_utterances = 10;
    const SynthCorpus a = generate_synthetic_corpus(cfg), b = generate_synthetic_corpus(cfg);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(a.labels[i] == b.labels[i]);
      CHECK(a.tracks[i].pitch == b.tracks[i].pitch);
      CHECK(a.tracks[i].energy == b.tracks[i].energy);
    }
  }

  TEST_CASE("labels manifest round trip") {
    SynthConfig cfg;
    cfg.num_utterances = 25;
    const SynthCorpus c = generate_synthetic_corpus(cfg);
    std::stringstream ss;
    write_labels_manifest(ss, c.labels);
    CHECK(read_labels_manifest(ss) == c.labels);
    std::istringstream bad("id\tnope\n");
    CHECK(error_of([&] { read_labels_manifest(bad); }).code() == ErrorCode::kSchema);
  }

  TEST_CASE("config validation") {
    SynthConfig cfg;
    cfg.classes = {{0, 1, 1}, {0, 1, 1}};
    CHECK(error_of([&] { cfg.validate(); }).code() == ErrorCode::kConfig);
    cfg.classes = {{0, 1, 3}};
    CHECK(error_of([&] { cfg.validate(); }).code() == ErrorCode::kConfig);
  }
}
