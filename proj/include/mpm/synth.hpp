#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpm/labels.hpp"
#include "mpm/signal_features.hpp"

namespace mpm {

struct SynthClass {
  double pitch_offset = 0.0;      // in units of offset_semitones
  double range_multiplier = 1.0;  // scales the declination component
  double rate_multiplier = 1.0;   // scales the syllable rate

  friend bool operator==(const SynthClass&, const SynthClass&) = default;
};

struct SynthConfig {
  int num_utterances = 200;
  double min_duration_seconds = 2.0;
  double max_duration_seconds = 4.0;
  double hop_seconds = 0.01;
  double min_rate_hz = 3.0;
  double max_rate_hz = 5.0;
  double rate_jitter = 0.1;  // per-syllable relative slot-length jitter
  int max_word_syllables = 3;
  double prominence_probability = 0.2;
  double prominence_gain = 1.8;
  double pause_probability = 0.3;  // per word junction, divided by the class rate multiplier
  double min_pause_seconds = 0.15;
  double max_pause_seconds = 0.35;
  double edge_silence_seconds = 0.1;
  double base_pitch_hz = 150.0;
  double offset_semitones = 4.0;
  double declination_semitones = 3.0;
  double wiggle_semitones = 1.0;
  double pitch_noise_semitones = 0.1;
  double energy_noise = 0.02;
  std::vector<SynthClass> classes{{0.5, 1.0, 0.7}, {-0.5, 1.0, 1.4}, {0.5, 2.5, 1.4}, {-0.5, 2.5, 0.7}};
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Everything needed to recompute an utterance's labels.
struct SynthSyllable {
  int start = 0;   // first frame of the slot
  int length = 0;  // slot length in frames
  bool prominent = false;
};

struct SynthWord {
  int first_syllable = 0;
  int num_syllables = 0;
  int pause_after = 0;  // frames, 0 for none
};

struct SynthUtterance {
  std::string id;
  int class_id = 0;
  int num_frames = 0;
  double rate_hz = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<SynthSyllable> syllables;
  std::vector<SynthWord> words;
};

struct SynthCorpus {
  std::vector<ProsodyTrack> tracks;
  std::vector<LabeledUtterance> labels;
  std::vector<SynthUtterance> params;
};

/// Contours are synthesized directly: an energy pulse per syllable slot
/// (raised cosine, amplified when prominent), VAD 0 in pauses and edge
/// silence, pitch = per-phrase declination * range + pulse-locked wiggles +
/// class offset. The nucleus of a slot is the phase interval [1/4, 3/4).
/// Pitch and energy go through normalize_track like extracted features.
SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg);

/// Labels recomputed from stored parameters alone.
LabeledUtterance decode_synthetic_labels(const SynthUtterance& params);

}  // namespace mpm
