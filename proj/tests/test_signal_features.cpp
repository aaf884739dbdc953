#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "mpm/error.hpp"
#include "mpm/masking.hpp"
#include "mpm/feature_cache.hpp"
#include "mpm/signal_features.hpp"
#include "mpm/wav.hpp"
#include "test_util.hpp"

using namespace mpm;
using test::silence;
using test::sine;

namespace {

template <typename Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mpm::Error");
  return ErrorCode::kIo;
}

void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels,
                   std::uint16_t bits, const std::vector<std::int16_t>& data) {
  std::ofstream out(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const auto bytes = static_cast<std::uint32_t>(data.size() * 2);
  out.write("RIFF", 4);
  u32(36 + bytes);
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(format);
  u16(channels);
  u32(16000);
  u32(16000u * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out.write("data", 4);
  u32(bytes);
  out.write(reinterpret_cast<const char*>(data.data()), bytes);
}

Waveform sawtooth(double hz, double seconds, int sr = 16000) {
  Waveform w;
  w.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::fmod(hz * static_cast<double>(i) / sr, 1.0);
    w.samples.push_back(0.5 * (2.0 * phase - 1.0));
  }
  return w;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_SUITE("wav") {
  TEST_CASE("one second of zeros") {
    test::TempDir dir("wav");
    write_raw_wav(dir / "z.wav", 1, 1, 16, std::vector<std::int16_t>(16000, 0));
    const Waveform w = load_waveform(dir / "z.wav");
    CHECK(w.sample_rate == 16000);
    CHECK(w.samples.size() == 16000);
    CHECK(std::all_of(w.samples.begin(), w.samples.end(), [](double s) { return s == 0.0; }));
  }

  TEST_CASE("full-scale sample scales by 1/32768") {
    test::TempDir dir("wav");
    write_raw_wav(dir / "one.wav", 1, 1, 16, {32767});
    const Waveform w = load_waveform(dir / "one.wav");
    REQUIRE(w.samples.size() == 1);
    CHECK(w.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-15));
    CHECK(w.samples[0] == doctest::Approx(0.99997).epsilon(1e-5));
  }

  TEST_CASE("write then load a 440 Hz sine stays within one quantization step") {
    test::TempDir dir("wav");
    const Waveform w = sine(440.0, 0.5, 16000, 0.8);
    save_waveform(dir / "s.wav", w);
    const Waveform back = load_waveform(dir / "s.wav");
    REQUIRE(back.samples.size() == w.samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
    CHECK(worst <= 1.0 / 32768.0);
  }

  TEST_CASE("malformed, multi-channel and non-PCM files are rejected") {
    test::TempDir dir("wav");
    {
      std::ofstream(dir / "junk.wav") << "definitely not a wave file";
    }
    CHECK(error_of([&] { load_waveform(dir / "junk.wav"); }) == ErrorCode::kFormat);
    write_raw_wav(dir / "stereo.wav", 1, 2, 16, {1, 2, 3, 4});
    CHECK(error_of([&] { load_waveform(dir / "stereo.wav"); }) == ErrorCode::kUnsupportedChannels);
    write_raw_wav(dir / "float.wav", 3, 1, 16, {1, 2});
    CHECK(error_of([&] { load_waveform(dir / "float.wav"); }) == ErrorCode::kUnsupportedEncoding);
    write_raw_wav(dir / "pcm8.wav", 1, 1, 8, {1, 2});
    CHECK(error_of([&] { load_waveform(dir / "pcm8.wav"); }) == ErrorCode::kUnsupportedEncoding);
  }
}

TEST_SUITE("pitch") {
  TEST_CASE("220 Hz sine is voiced and accurate") {
    const PitchTrack p = estimate_pitch(sine(220.0, 1.0), 0.01, 60.0, 400.0);
    CHECK(p.size() == 100);
    int good = 0;
    for (int i = 0; i < p.size(); ++i) {
      if (p.voiced(i) && std::abs(p.f0_hz[static_cast<std::size_t>(i)] - 220.0) <= 0.05 * 220.0) ++good;
    }
    CHECK(good >= 95);
  }

  TEST_CASE("silence is entirely unvoiced") {
    const PitchTrack p = estimate_pitch(silence(1.0), 0.01, 60.0, 400.0);
    for (int i = 0; i < p.size(); ++i) CHECK_FALSE(p.voiced(i));
  }

  TEST_CASE("100 Hz sawtooth has no octave error") {
    const PitchTrack p = estimate_pitch(sawtooth(100.0, 1.0), 0.01, 60.0, 400.0);
    std::vector<double> voiced;
    for (int i = 0; i < p.size(); ++i) {
      if (p.voiced(i)) voiced.push_back(p.f0_hz[static_cast<std::size_t>(i)]);
    }
    REQUIRE(!voiced.empty());
    CHECK(std::abs(median(voiced) - 100.0) <= 5.0);
  }

  TEST_CASE("voiced estimates stay inside the search range") {
    for (double hz : {70.0, 150.0, 390.0}) {
      const PitchTrack p = estimate_pitch(sine(hz, 0.5), 0.01, 60.0, 400.0);
      for (double f : p.f0_hz) {
        if (f != PitchTrack::kUnvoiced) CHECK((f >= 60.0 && f <= 400.0));
      }
    }
  }

  TEST_CASE("too-short waveform and bad ranges") {
    CHECK(error_of([] { estimate_pitch(sine(220, 0.02), 0.01, 60.0, 400.0); }) == ErrorCode::kEmptyTrack);
    CHECK(error_of([] { estimate_pitch(sine(220, 1.0), 0.01, 400.0, 60.0); }) == ErrorCode::kInvalidArgument);
    CHECK(error_of([] { estimate_pitch(sine(220, 1.0), 0.03, 60.0, 400.0); }) == ErrorCode::kInvalidArgument);
    CHECK(error_of([] { estimate_pitch(sine(220, 1.0, 8000), 0.01, 60.0, 4000.0); }) ==
          ErrorCode::kInvalidArgument);
  }
}

TEST_SUITE("energy") {
  TEST_CASE("silence has zero energy") {
    const Eigen::VectorXd e = compute_energy(silence(0.5), 0.01, 0.025);
    CHECK(e.size() == 50);
    CHECK(e.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("stationary sine has constant interior energy") {
    const Eigen::VectorXd e = compute_energy(sine(300.0, 1.0), 0.01, 0.025);
    const Eigen::VectorXd interior = e.segment(3, e.size() - 6);
    const double mean = interior.mean();
    CHECK((interior.array() - mean).abs().maxCoeff() <= 0.01 * mean);
  }

  TEST_CASE("energy is homogeneous of degree one") {
    Waveform w = sine(180.0, 0.5, 16000, 0.3);
    const Eigen::VectorXd e1 = compute_energy(w, 0.01, 0.025);
    for (double& s : w.samples) s *= 2.0;
    const Eigen::VectorXd e2 = compute_energy(w, 0.01, 0.025);
    for (Eigen::Index i = 0; i < e1.size(); ++i) {
      CHECK(std::abs(e2(i) - 2.0 * e1(i)) <= 1e-9 * 2.0 * e1(i));
    }
  }

  TEST_CASE("frame length must cover the hop") {
    CHECK(error_of([] { compute_energy(sine(200, 1.0), 0.01, 0.005); }) == ErrorCode::kInvalidArgument);
  }
}

TEST_SUITE("vad") {
  TEST_CASE("unvoiced pitch gives all zeros") {
    PitchTrack p;
    p.f0_hz.assign(20, PitchTrack::kUnvoiced);
    const Flags v = detect_voice_activity(p, Eigen::VectorXd::Ones(20));
    CHECK(std::count(v.begin(), v.end(), 1) == 0);
  }

  TEST_CASE("voiced sine with uniform energy gives all ones") {
    const Waveform w = sine(200.0, 1.0);
    const Flags v = detect_voice_activity(estimate_pitch(w, 0.01, 60, 400), compute_energy(w, 0.01, 0.025));
    CHECK(std::count(v.begin(), v.end(), 1) == 100);
  }

  TEST_CASE("inserted 200 ms silence becomes one zero run") {
    Waveform w = sine(200.0, 1.0);
    // Silence over [0.4 s, 0.6 s) = frames 40..59.
    std::fill(w.samples.begin() + 6400, w.samples.begin() + 9600, 0.0);
    const Flags v = detect_voice_activity(estimate_pitch(w, 0.01, 60, 400), compute_energy(w, 0.01, 0.025));
    int first = -1, last = -1, runs = 0;
    for (int i = 0; i < static_cast<int>(v.size()); ++i) {
      if (v[static_cast<std::size_t>(i)] == 0) {
        if (first < 0) first = i;
        if (i == 0 || v[static_cast<std::size_t>(i - 1)] == 1) ++runs;
        last = i;
      }
    }
    CHECK(runs == 1);
    CHECK(std::abs(first - 40) <= 1);
    CHECK(std::abs(last - 59) <= 1);
  }

  TEST_CASE("zeroing samples never turns an inactive frame active inside the span") {
    Rng rng(5);
    const Waveform base = [] {
      Waveform w = sine(150.0, 1.5, 16000, 0.4);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] *= 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 1.5 * static_cast<double>(i) / 16000.0);
      }
      std::fill(w.samples.begin() + 12000, w.samples.begin() + 15000, 0.0);
      return w;
    }();
    const Flags v0 = detect_voice_activity(estimate_pitch(base, 0.01, 60, 400), compute_energy(base, 0.01, 0.025));
    for (int trial = 0; trial < 5; ++trial) {
      const int start_frame = std::uniform_int_distribution<int>(0, 120)(rng);
      const int len = std::uniform_int_distribution<int>(5, 25)(rng);
      Waveform w = base;
      std::fill(w.samples.begin() + start_frame * 160, w.samples.begin() + (start_frame + len) * 160, 0.0);
      const Flags v1 = detect_voice_activity(estimate_pitch(w, 0.01, 60, 400), compute_energy(w, 0.01, 0.025));
      for (int i = start_frame; i < start_frame + len; ++i) {
        if (v0[static_cast<std::size_t>(i)] == 0) CHECK(v1[static_cast<std::size_t>(i)] == 0);
      }
    }
  }
}

TEST_SUITE("normalize") {
  TEST_CASE("fixtures") {
    const Eigen::VectorXd c = normalize_track(Eigen::Vector4d(5, 5, 5, 5));
    CHECK(c.cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd two = normalize_track(Eigen::Vector2d(0, 2));
    CHECK(two(0) == doctest::Approx(-1.0));
    CHECK(two(1) == doctest::Approx(1.0));
  }

  TEST_CASE("z-score statistics, idempotence and affine invariance") {
    Rng rng(1);
    std::normal_distribution<double> n(3.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(50);
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);
      const Eigen::VectorXd z = normalize_track(x);
      CHECK(std::abs(z.mean()) < 1e-6);
      CHECK(std::abs((z.array() - z.mean()).square().mean() - 1.0) < 1e-6);
      CHECK((normalize_track(z) - z).cwiseAbs().maxCoeff() < 1e-6);
      const double a = 0.1 + std::abs(n(rng)), b = n(rng);
      const Eigen::VectorXd affine = (a * x.array() + b).matrix();
      CHECK((normalize_track(affine) - z).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("undefined frames are interpolated and edges held") {
    const Eigen::VectorXd x = (Eigen::VectorXd(6) << 99, 1, 99, 3, 99, 99).finished();
    const Flags defined{0, 1, 0, 1, 0, 0};
    const Eigen::VectorXd z = normalize_track(x, defined);
    // Defined values 1 and 3 -> -1 and 1; gaps filled linearly, edges held.
    CHECK(z(0) == doctest::Approx(-1.0));
    CHECK(z(1) == doctest::Approx(-1.0));
    CHECK(z(2) == doctest::Approx(0.0));
    CHECK(z(3) == doctest::Approx(1.0));
    CHECK(z(5) == doctest::Approx(1.0));
  }

  TEST_CASE("no defined frame is an error") {
    CHECK(error_of([] { normalize_track(Eigen::Vector3d(1, 2, 3), Flags{0, 0, 0}); }) ==
          ErrorCode::kDegenerateTrack);
  }
}

TEST_SUITE("extract_prosody") {
  TEST_CASE("truncation to six seconds") {
    const ProsodyTrack t = extract_prosody(sine(200.0, 6.5));
    CHECK(t.num_frames() == 600);
    CHECK(t.pitch.size() == 600);
    CHECK(t.energy.size() == 600);
  }

  TEST_CASE("silence gives zero contours") {
    const ProsodyTrack t = extract_prosody(silence(1.0));
    CHECK(t.num_frames() == 100);
    CHECK(t.pitch.cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.energy.cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::count(t.vad.begin(), t.vad.end(), 1) == 0);
  }

  TEST_CASE("two seconds of 220 Hz") {
    const ProsodyTrack t = extract_prosody(sine(220.0, 2.0));
    CHECK(t.num_frames() == 200);
    CHECK(std::count(t.vad.begin(), t.vad.end(), 1) == 200);
  }

  TEST_CASE("contours share floor(duration / hop) frames") {
    for (double secs : {0.25, 0.731, 1.0, 1.999, 3.3333}) {
      for (int sr : {8000, 16000, 22050}) {
        const ProsodyTrack t = extract_prosody(sine(180.0, secs, sr));
        const int expected = static_cast<int>(std::floor(std::llround(secs * sr) / (0.01 * sr) + 1e-9));
        CHECK(t.num_frames() == expected);
        CHECK(t.pitch.size() == expected);
        CHECK(t.energy.size() == expected);
      }
    }
  }

  TEST_CASE("normalized contours are invariant to amplitude") {
    Waveform w = sine(160.0, 1.2, 16000, 0.3);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      w.samples[i] *= 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * 2.0 * static_cast<double>(i) / 16000.0);
    }
    const ProsodyTrack ref = extract_prosody(w);
    for (double a : {0.5, 2.0}) {
      Waveform scaled = w;
      for (double& s : scaled.samples) s *= a;
      const ProsodyTrack t = extract_prosody(scaled);
      CHECK((t.pitch - ref.pitch).cwiseAbs().maxCoeff() <= 1e-3);
      CHECK((t.energy - ref.energy).cwiseAbs().maxCoeff() <= 1e-3);
    }
  }
}

TEST_CASE("feature cache round trip") {
  test::TempDir dir("cache");
  const ProsodyTrack t = extract_prosody(sine(220.0, 0.8));
  {
    FeatureCache cache(dir.path());
    cache.put("utt/1", t);
    cache.save_manifest();
  }
  const FeatureCache cache = FeatureCache::open(dir.path());
  REQUIRE(cache.entries().size() == 1);
  CHECK(cache.entries()[0].num_frames == 80);
  CHECK(cache.entries()[0].duration_seconds == doctest::Approx(0.8));
  const ProsodyTrack back = cache.get("utt/1");
  CHECK(back.vad == t.vad);
  CHECK((back.pitch - t.pitch).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.energy - t.energy).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(error_of([&] { cache.get("missing"); }) == ErrorCode::kMissingArtifact);
  CHECK(error_of([&] { FeatureCache::open(dir / "nope"); }) == ErrorCode::kMissingArtifact);
}
