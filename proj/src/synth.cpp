#include "mpm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mpm/error.hpp"

namespace mpm {

void SynthConfig::validate() const {
  if (num_utterances < 1) throw Error(ErrorCode::kConfig, "synth: num_utterances must be positive");
  if (!(hop_seconds > 0.0)) throw Error(ErrorCode::kConfig, "synth: hop must be positive");
  if (!(min_duration_seconds > 2 * edge_silence_seconds) || max_duration_seconds < min_duration_seconds) {
    throw Error(ErrorCode::kConfig, "synth: bad duration range");
  }
  if (!(min_rate_hz > 0.0) || max_rate_hz < min_rate_hz) throw Error(ErrorCode::kConfig, "synth: bad rate range");
  if (max_word_syllables < 1) throw Error(ErrorCode::kConfig, "synth: max_word_syllables must be >= 1");
  if (min_pause_seconds < hop_seconds || max_pause_seconds < min_pause_seconds) {
    throw Error(ErrorCode::kConfig, "synth: bad pause range");
  }
  if (classes.empty()) throw Error(ErrorCode::kConfig, "synth: empty class table");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (classes[i] == classes[j]) throw Error(ErrorCode::kConfig, "synth: duplicate class rows");
    }
    const double lo = min_rate_hz * classes[i].rate_multiplier, hi = max_rate_hz * classes[i].rate_multiplier;
    if (lo < 2.0 || hi > 10.0) throw Error(ErrorCode::kConfig, "synth: class rates must lie in [2, 10] Hz");
  }
}

namespace {

double envelope(int j, int length) {
  return 0.5 * (1.0 - std::cos(2.0 * M_PI * (j + 0.5) / length));
}

bool in_nucleus(int j, int length) {
  const double phase = (j + 0.5) / length;
  return phase >= 0.25 && phase < 0.75;
}

int frames_of(double seconds, double hop) { return std::max(1, static_cast<int>(std::lround(seconds / hop))); }

SynthUtterance plan_utterance(const SynthConfig& cfg, int index, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SynthUtterance p;
  p.id = "synth_" + std::string(index < 10 ? "000" : index < 100 ? "00" : index < 1000 ? "0" : "") +
         std::to_string(index);
  p.class_id = static_cast<int>(rng() % cfg.classes.size());
  const SynthClass& cls = cfg.classes[static_cast<std::size_t>(p.class_id)];
  const double duration = cfg.min_duration_seconds + u01(rng) * (cfg.max_duration_seconds - cfg.min_duration_seconds);
  p.num_frames = static_cast<int>(std::floor(duration / cfg.hop_seconds + 1e-9));
  p.rate_hz = (cfg.min_rate_hz + u01(rng) * (cfg.max_rate_hz - cfg.min_rate_hz)) * cls.rate_multiplier;
  p.noise_seed = rng();

  const int edge = frames_of(cfg.edge_silence_seconds, cfg.hop_seconds);
  const int end = p.num_frames - edge;
  const double pause_p = std::min(1.0, cfg.pause_probability / cls.rate_multiplier);
  int cursor = edge;
  bool full = false;
  while (!full) {
    SynthWord w;
    w.first_syllable = static_cast<int>(p.syllables.size());
    const int want = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_word_syllables));
    for (int k = 0; k < want; ++k) {
      const double jitter = 1.0 + cfg.rate_jitter * (2.0 * u01(rng) - 1.0);
      const int len = std::max(4, static_cast<int>(std::lround(jitter / (p.rate_hz * cfg.hop_seconds))));
      const bool prominent = u01(rng) < cfg.prominence_probability;
      if (cursor + len > end) {
        full = true;
        break;
      }
      p.syllables.push_back({cursor, len, prominent});
      cursor += len;
      ++w.num_syllables;
    }
    if (w.num_syllables == 0) break;
    if (!full && u01(rng) < pause_p) {
      const double secs = cfg.min_pause_seconds + u01(rng) * (cfg.max_pause_seconds - cfg.min_pause_seconds);
      const int len = frames_of(secs, cfg.hop_seconds);
      if (cursor + len < end) {
        w.pause_after = len;
        cursor += len;
      }
    }
    p.words.push_back(w);
  }
  return p;
}

struct Rendered {
  ProsodyTrack track;
  LabeledUtterance labels;
};

Rendered render(const SynthConfig& cfg, const SynthUtterance& p) {
  const SynthClass& cls = cfg.classes[static_cast<std::size_t>(p.class_id)];
  const int n = p.num_frames;
  std::mt19937_64 rng(p.noise_seed);
  std::normal_distribution<double> nd(0.0, 1.0);

  Eigen::VectorXd semitones = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd energy = Eigen::VectorXd::Zero(n);
  Flags vad(static_cast<std::size_t>(n), 0);
  Rendered r;
  r.labels.id = p.id;
  r.labels.utterance_label = p.class_id;
  r.labels.syllable_count = static_cast<int>(p.syllables.size());
  r.labels.provenance = Provenance::kSynthetic;
  r.labels.frame_labels.assign(static_cast<std::size_t>(n), 0);

  // Phrases are maximal word runs without an internal pause.
  std::size_t w = 0;
  while (w < p.words.size()) {
    std::size_t last = w;
    while (last + 1 < p.words.size() && p.words[last].pause_after == 0) ++last;
    const SynthSyllable& a = p.syllables[static_cast<std::size_t>(p.words[w].first_syllable)];
    const SynthWord& lw = p.words[last];
    const SynthSyllable& b = p.syllables[static_cast<std::size_t>(lw.first_syllable + lw.num_syllables - 1)];
    const int start = a.start, stop = b.start + b.length;
    for (int t = start; t < stop; ++t) {
      const double x = stop - start > 1 ? static_cast<double>(t - start) / (stop - start - 1) : 0.5;
      semitones(t) = cfg.declination_semitones * cls.range_multiplier * (1.0 - 2.0 * x);
      vad[static_cast<std::size_t>(t)] = 1;
    }
    w = last + 1;
  }

  for (const SynthSyllable& s : p.syllables) {
    const double gain = s.prominent ? cfg.prominence_gain : 1.0;
    for (int j = 0; j < s.length; ++j) {
      const int t = s.start + j;
      const double e = envelope(j, s.length);
      energy(t) += gain * e;
      semitones(t) += cfg.wiggle_semitones * gain * e;
      if (in_nucleus(j, s.length)) r.labels.frame_labels[static_cast<std::size_t>(t)] = 1;
    }
  }

  Eigen::VectorXd hz = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < n; ++t) {
    const double noise_st = cfg.pitch_noise_semitones * nd(rng);
    const double noise_e = cfg.energy_noise * std::abs(nd(rng));
    if (vad[static_cast<std::size_t>(t)]) {
      const double st = cfg.offset_semitones * cls.pitch_offset + semitones(t) + noise_st;
      hz(t) = cfg.base_pitch_hz * std::pow(2.0, st / 12.0);
      energy(t) += 0.05 + noise_e;
    } else {
      energy(t) = 0.01 + noise_e;
    }
  }

  for (const SynthWord& wd : p.words) {
    const SynthSyllable& first = p.syllables[static_cast<std::size_t>(wd.first_syllable)];
    const SynthSyllable& lastsyl = p.syllables[static_cast<std::size_t>(wd.first_syllable + wd.num_syllables - 1)];
    WordLabel wl;
    wl.span = {first.start, lastsyl.start + lastsyl.length};
    wl.prominence = 0;
    for (int k = 0; k < wd.num_syllables; ++k) {
      if (p.syllables[static_cast<std::size_t>(wd.first_syllable + k)].prominent) wl.prominence = 1;
    }
    wl.boundary = wd.pause_after > 0 ? 1 : 0;
    r.labels.words.push_back(wl);
  }

  r.track.hop_seconds = cfg.hop_seconds;
  r.track.raw_pitch_hz = hz;
  r.track.vad = vad;
  r.track.energy = normalize_track(energy);
  r.track.pitch = normalize_track(hz, vad);
  return r;
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthCorpus c;
  for (int i = 0; i < cfg.num_utterances; ++i) {
    SynthUtterance p = plan_utterance(cfg, i, rng);
    Rendered r = render(cfg, p);
    c.tracks.push_back(std::move(r.track));
    c.labels.push_back(std::move(r.labels));
    c.params.push_back(std::move(p));
  }
  return c;
}

LabeledUtterance decode_synthetic_labels(const SynthUtterance& p) {
  LabeledUtterance u;
  u.id = p.id;
  u.utterance_label = p.class_id;
  u.provenance = Provenance::kSynthetic;
  u.syllable_count = static_cast<int>(p.syllables.size());
  u.frame_labels.assign(static_cast<std::size_t>(p.num_frames), 0);
  for (const SynthSyllable& s : p.syllables) {
    // Frame j of a slot of length L is a nucleus iff L <= 4j + 2 < 3L.
    for (int j = 0; j < s.length; ++j) {
      if (4 * j + 2 >= s.length && 4 * j + 2 < 3 * s.length) u.frame_labels[static_cast<std::size_t>(s.start + j)] = 1;
    }
  }
  for (const SynthWord& w : p.words) {
    const auto b = p.syllables.begin() + w.first_syllable;
    const auto e = b + w.num_syllables;
    WordLabel wl;
    wl.span = {b->start, (e - 1)->start + (e - 1)->length};
    wl.prominence = std::any_of(b, e, [](const SynthSyllable& s) { return s.prominent; }) ? 1 : 0;
    wl.boundary = w.pause_after > 0 ? 1 : 0;
    u.words.push_back(wl);
  }
  return u;
}

}  // namespace mpm
