#pragma once

#include <filesystem>
#include <vector>

namespace mpm {

/// Mono audio with samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws kInvalidArgument unless the waveform is non-empty, finite, and
/// sampled at 8 kHz or above.
void validate_waveform(const Waveform& w);

/// Reads a RIFF/WAVE PCM16 mono file. Samples are divided by 32768.
Waveform load_waveform(const std::filesystem::path& path);

/// Writes PCM16 mono; samples are clipped to [-1, 1) and rounded.
void save_waveform(const std::filesystem::path& path, const Waveform& w);

}  // namespace mpm
