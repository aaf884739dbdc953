#pragma once

#include <random>
#include <string>
#include <vector>

#include "mpm/codec.hpp"
#include "mpm/types.hpp"

namespace mpm {

using Rng = std::mt19937_64;

struct MaskConfig {
  enum class Strategy { kFixed, kRandom };

  Strategy strategy = Strategy::kFixed;
  int mask_length = 16;
  // Inclusive range for the random strategy, resampled once per batch.
  int random_min = 1;
  int random_max = 128;

  static MaskConfig fixed(int m) { return {Strategy::kFixed, m, 1, 128}; }
  static MaskConfig random(int lo = 1, int hi = 128) { return {Strategy::kRandom, hi, lo, hi}; }

  /// "4", "16", "random", ... as used on the command line and in reports.
  std::string name() const;
  static MaskConfig parse(const std::string& name);

  /// The span length to use for the next batch.
  int draw_length(Rng& rng) const;
};

inline constexpr double kMaskFractionLow = 0.45;
inline constexpr double kMaskFractionHigh = 0.55;

/// Union of masked spans. Spans are sorted, disjoint and non-adjacent.
struct MaskPlan {
  std::vector<FrameSpan> spans;
  int seq_len = 0;

  int masked_count() const;
  double masked_fraction() const {
    return seq_len > 0 ? static_cast<double>(masked_count()) / seq_len : 0.0;
  }
  Flags indicator() const;
  void add(FrameSpan span);
};

/// Masks random spans of length m (clamped to ceil(seq_len / 2) when a single
/// span would exceed 55% of the sequence) until at least half the frames are
/// masked. Span lengths are cut to the remaining 55% budget so the fraction
/// always ends in [0.5, 0.55].
MaskPlan sample_mask_plan(int seq_len, int mask_length, Rng& rng);

struct MaskedTrack {
  TokenTrack corrupted;
  TokenTrack targets;
  Flags masked;
};

/// Applies the same plan to all three streams.
MaskedTrack apply_mask(const TokenTrack& tt, const MaskPlan& plan);

}  // namespace mpm
