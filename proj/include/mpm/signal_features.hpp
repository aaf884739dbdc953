#pragma once

#include <vector>

#include <Eigen/Core>

#include "mpm/types.hpp"
#include "mpm/wav.hpp"

namespace mpm {

struct FeatureConfig {
  double hop_seconds = 0.01;
  double frame_length_seconds = 0.025;  // energy analysis window
  double fmin_hz = 60.0;
  double fmax_hz = 400.0;
  double yin_threshold = 0.15;
  int num_mel_bands = 80;
  double energy_floor_ratio = 0.1;
  double max_utterance_seconds = 6.0;
};

/// Aligned per-frame contours. After extract_prosody the pitch and energy
/// contours are z-scored over the utterance and vad is exactly 0/1.
struct ProsodyTrack {
  Eigen::VectorXd pitch;
  Eigen::VectorXd energy;
  Flags vad;
  // Pre-normalization F0 in Hz, PitchTrack::kUnvoiced where unvoiced. May be
  // empty for tracks that never had one.
  Eigen::VectorXd raw_pitch_hz;
  double hop_seconds = 0.01;

  int num_frames() const { return static_cast<int>(vad.size()); }
};

/// Raw pitch estimates; f0_hz[i] == kUnvoiced marks an unvoiced frame.
struct PitchTrack {
  static constexpr double kUnvoiced = 0.0;

  std::vector<double> f0_hz;

  bool voiced(int i) const { return f0_hz[static_cast<std::size_t>(i)] != kUnvoiced; }
  int size() const { return static_cast<int>(f0_hz.size()); }
};

/// floor(duration / hop), the frame count shared by every contour.
int num_frames_for(const Waveform& w, double hop_seconds);

/// YIN cumulative-mean-normalized difference with parabolic lag refinement.
/// Frame i is centred at (i + 0.5) * hop (windows that would cross the signal
/// edges are shifted inside); voiced estimates lie in [fmin, fmax].
PitchTrack estimate_pitch(const Waveform& w, double hop_seconds, double fmin_hz,
                          double fmax_hz, double threshold = 0.15);

/// Per-frame RMS over the bands of a magnitude mel spectrogram (Hann window,
/// HTK mel scale over [0, sr/2]).
Eigen::VectorXd compute_energy(const Waveform& w, double hop_seconds,
                               double frame_length_seconds, int num_mel_bands = 80);

/// 1 iff the frame is voiced and its raw energy exceeds
/// floor_ratio * median(energy).
Flags detect_voice_activity(const PitchTrack& pitch, const Eigen::VectorXd& energy,
                            double floor_ratio = 0.1);

/// Z-score over the defined frames (population variance). Undefined frames are
/// filled by linear interpolation between defined neighbours, edges held, and
/// then share the same affine map. A constant contour maps to zeros.
Eigen::VectorXd normalize_track(const Eigen::VectorXd& values, const Flags& defined);

/// Convenience overload with every frame defined.
Eigen::VectorXd normalize_track(const Eigen::VectorXd& values);

/// Truncates to cfg.max_utterance_seconds, then runs pitch, energy, VAD and
/// normalization. An utterance with no voiced frame gets an all-zero pitch
/// contour.
ProsodyTrack extract_prosody(const Waveform& w, const FeatureConfig& cfg = {});

}  // namespace mpm
