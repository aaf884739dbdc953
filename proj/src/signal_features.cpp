#include "mpm/signal_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "mpm/error.hpp"

namespace mpm {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular filters, rows = bands, cols = rfft bins.
Eigen::MatrixXd mel_filterbank(int num_bands, int n_fft, int sample_rate) {
  const int num_bins = n_fft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(num_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / (num_bands + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(num_bands, num_bins);
  for (int b = 0; b < num_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < num_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(b, k) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

double sample_at(const std::vector<double>& x, long i) {
  return (i < 0 || i >= static_cast<long>(x.size())) ? 0.0 : x[static_cast<std::size_t>(i)];
}

void check_hop(double hop_seconds) {
  if (!(hop_seconds > 0.0)) throw Error(ErrorCode::kInvalidArgument, "hop must be positive");
}

}  // namespace

int num_frames_for(const Waveform& w, double hop_seconds) {
  check_hop(hop_seconds);
  const double exact = w.duration_seconds() / hop_seconds;
  // Tolerate representation error in e.g. 6.0 / 0.01.
  return static_cast<int>(std::floor(exact + 1e-9));
}

PitchTrack estimate_pitch(const Waveform& w, double hop_seconds, double fmin_hz, double fmax_hz,
                          double threshold) {
  validate_waveform(w);
  if (!(fmin_hz > 0.0 && fmin_hz < fmax_hz)) {
    throw Error(ErrorCode::kInvalidArgument, "pitch range requires 0 < fmin < fmax");
  }
  if (fmax_hz >= w.sample_rate / 2.0) {
    throw Error(ErrorCode::kInvalidArgument, "fmax must lie below the Nyquist frequency");
  }
  if (hop_seconds < 0.005 - 1e-12 || hop_seconds > 0.02 + 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, "pitch hop must lie in [5 ms, 20 ms]");
  }

  const double sr = w.sample_rate;
  const int tau_min = std::max(2, static_cast<int>(std::floor(sr / fmax_hz)));
  const int tau_max = static_cast<int>(std::ceil(sr / fmin_hz));
  const int window = tau_max;
  const int span = window + tau_max + 1;
  if (static_cast<int>(w.samples.size()) < span) {
    throw Error(ErrorCode::kEmptyTrack, "waveform shorter than one pitch analysis window");
  }

  const int frames = num_frames_for(w, hop_seconds);
  PitchTrack track;
  track.f0_hz.assign(static_cast<std::size_t>(frames), PitchTrack::kUnvoiced);

  std::vector<double> seg(static_cast<std::size_t>(span));
  std::vector<double> diff(static_cast<std::size_t>(tau_max) + 2, 0.0);
  std::vector<double> cmnd(diff.size(), 1.0);

  for (int i = 0; i < frames; ++i) {
    const double centre = (i + 0.5) * hop_seconds * sr;
    // Edge frames analyse the nearest full window inside the signal.
    const long start = std::clamp<long>(std::lround(centre - span / 2.0), 0,
                                        static_cast<long>(w.samples.size()) - span);
    double power = 0.0;
    for (int j = 0; j < span; ++j) {
      seg[static_cast<std::size_t>(j)] = sample_at(w.samples, start + j);
      power += seg[static_cast<std::size_t>(j)] * seg[static_cast<std::size_t>(j)];
    }
    if (power <= 1e-12) continue;

    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      double acc = 0.0;
      for (int j = 0; j < window; ++j) {
        const double d = seg[static_cast<std::size_t>(j)] - seg[static_cast<std::size_t>(j + tau)];
        acc += d * d;
      }
      diff[static_cast<std::size_t>(tau)] = acc;
    }
    double running = 0.0;
    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      running += diff[static_cast<std::size_t>(tau)];
      cmnd[static_cast<std::size_t>(tau)] =
          running > 0.0 ? diff[static_cast<std::size_t>(tau)] * tau / running : 1.0;
    }

    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[static_cast<std::size_t>(tau)] < threshold) {
        while (tau + 1 <= tau_max &&
               cmnd[static_cast<std::size_t>(tau + 1)] < cmnd[static_cast<std::size_t>(tau)]) {
          ++tau;
        }
        best = tau;
        break;
      }
    }
    if (best < 0) continue;

    double refined = best;
    const double a = cmnd[static_cast<std::size_t>(best - 1)];
    const double b = cmnd[static_cast<std::size_t>(best)];
    const double c = cmnd[static_cast<std::size_t>(best + 1)];
    const double denom = a - 2.0 * b + c;
    if (denom > 0.0) refined += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    track.f0_hz[static_cast<std::size_t>(i)] = std::clamp(sr / refined, fmin_hz, fmax_hz);
  }
  return track;
}

Eigen::VectorXd compute_energy(const Waveform& w, double hop_seconds, double frame_length_seconds,
                               int num_mel_bands) {
  validate_waveform(w);
  check_hop(hop_seconds);
  if (frame_length_seconds < hop_seconds) {
    throw Error(ErrorCode::kInvalidArgument, "energy frame length must be at least the hop");
  }
  const double sr = w.sample_rate;
  const int frame_len = static_cast<int>(std::lround(frame_length_seconds * sr));
  if (static_cast<int>(w.samples.size()) < frame_len) {
    throw Error(ErrorCode::kEmptyTrack, "waveform shorter than one energy frame");
  }
  const int n_fft = std::max(1024, next_pow2(frame_len));
  const Eigen::MatrixXd fb = mel_filterbank(num_mel_bands, n_fft, w.sample_rate);

  std::vector<double> hann(static_cast<std::size_t>(frame_len));
  for (int j = 0; j < frame_len; ++j) {
    hann[static_cast<std::size_t>(j)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * j / frame_len);
  }

  const int frames = num_frames_for(w, hop_seconds);
  Eigen::VectorXd energy(frames);
  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd mag(n_fft / 2 + 1);

  for (int i = 0; i < frames; ++i) {
    const double centre = (i + 0.5) * hop_seconds * sr;
    const long start = std::lround(centre - frame_len / 2.0);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int j = 0; j < frame_len; ++j) {
      buf[static_cast<std::size_t>(j)] = hann[static_cast<std::size_t>(j)] * sample_at(w.samples, start + j);
    }
    fft.fwd(spec, buf);
    for (int k = 0; k <= n_fft / 2; ++k) mag(k) = std::abs(spec[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd bands = fb * mag;
    energy(i) = std::sqrt(bands.squaredNorm() / num_mel_bands);
  }
  return energy;
}

Flags detect_voice_activity(const PitchTrack& pitch, const Eigen::VectorXd& energy,
                            double floor_ratio) {
  if (pitch.size() != energy.size()) {
    throw Error(ErrorCode::kAlignment, "pitch and energy tracks differ in length");
  }
  Flags vad(static_cast<std::size_t>(pitch.size()), 0);
  if (vad.empty()) return vad;
  std::vector<double> sorted(energy.data(), energy.data() + energy.size());
  const auto mid = sorted.begin() + static_cast<long>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  double median = *mid;
  if (sorted.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(sorted.begin(), mid));
  }
  const double floor = floor_ratio * median;
  for (int i = 0; i < pitch.size(); ++i) {
    vad[static_cast<std::size_t>(i)] = (pitch.voiced(i) && energy(i) > floor) ? 1 : 0;
  }
  return vad;
}

Eigen::VectorXd normalize_track(const Eigen::VectorXd& values, const Flags& defined) {
  const Eigen::Index n = values.size();
  if (static_cast<Eigen::Index>(defined.size()) != n) {
    throw Error(ErrorCode::kAlignment, "defined-mask length differs from contour length");
  }
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (defined[static_cast<std::size_t>(i)]) idx.push_back(i);
  }
  if (idx.empty()) throw Error(ErrorCode::kDegenerateTrack, "no defined frames to normalize");

  double mean = 0.0;
  for (auto i : idx) mean += values(i);
  mean /= static_cast<double>(idx.size());
  double var = 0.0;
  for (auto i : idx) var += (values(i) - mean) * (values(i) - mean);
  var /= static_cast<double>(idx.size());

  Eigen::VectorXd filled(n);
  for (Eigen::Index i = 0; i <= idx.front(); ++i) filled(i) = values(idx.front());
  for (Eigen::Index i = idx.back(); i < n; ++i) filled(i) = values(idx.back());
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const Eigen::Index a = idx[k], b = idx[k + 1];
    for (Eigen::Index i = a; i <= b; ++i) {
      const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
      filled(i) = (1.0 - t) * values(a) + t * values(b);
    }
  }

  if (var <= 1e-24 * (1.0 + mean * mean)) return Eigen::VectorXd::Zero(n);
  return (filled.array() - mean) / std::sqrt(var);
}

Eigen::VectorXd normalize_track(const Eigen::VectorXd& values) {
  return normalize_track(values, Flags(static_cast<std::size_t>(values.size()), 1));
}

ProsodyTrack extract_prosody(const Waveform& w, const FeatureConfig& cfg) {
  validate_waveform(w);
  Waveform clipped;
  clipped.sample_rate = w.sample_rate;
  const auto max_samples = static_cast<std::size_t>(
      std::floor(cfg.max_utterance_seconds * w.sample_rate + 1e-9));
  clipped.samples.assign(w.samples.begin(),
                         w.samples.begin() + static_cast<long>(std::min(max_samples, w.samples.size())));

  const PitchTrack pitch =
      estimate_pitch(clipped, cfg.hop_seconds, cfg.fmin_hz, cfg.fmax_hz, cfg.yin_threshold);
  const Eigen::VectorXd energy = compute_energy(clipped, cfg.hop_seconds, cfg.frame_length_seconds,
                                                cfg.num_mel_bands);

  ProsodyTrack track;
  track.hop_seconds = cfg.hop_seconds;
  track.vad = detect_voice_activity(pitch, energy, cfg.energy_floor_ratio);

  Flags voiced(static_cast<std::size_t>(pitch.size()));
  Eigen::VectorXd f0(pitch.size());
  bool any_voiced = false;
  for (int i = 0; i < pitch.size(); ++i) {
    voiced[static_cast<std::size_t>(i)] = pitch.voiced(i) ? 1 : 0;
    any_voiced = any_voiced || pitch.voiced(i);
    f0(i) = pitch.f0_hz[static_cast<std::size_t>(i)];
  }
  track.raw_pitch_hz = f0;
  track.pitch = any_voiced ? normalize_track(f0, voiced) : Eigen::VectorXd::Zero(pitch.size());
  track.energy = normalize_track(energy);
  return track;
}

}  // namespace mpm
