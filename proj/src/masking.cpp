#include "mpm/masking.hpp"

#include <algorithm>
#include <cmath>

#include "mpm/error.hpp"

namespace mpm {

std::string MaskConfig::name() const {
  if (strategy == Strategy::kRandom) return "random";
  return std::to_string(mask_length);
}

MaskConfig MaskConfig::parse(const std::string& name) {
  if (name == "random") return random();
  std::size_t used = 0;
  int m = 0;
  try {
    m = std::stoi(name, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != name.size() || m < 1) {
    throw Error(ErrorCode::kConfig, "unknown corruption strategy '" + name + "'");
  }
  return fixed(m);
}

int MaskConfig::draw_length(Rng& rng) const {
  if (strategy == Strategy::kFixed) return mask_length;
  return std::uniform_int_distribution<int>(random_min, random_max)(rng);
}

int MaskPlan::masked_count() const {
  int n = 0;
  for (const auto& s : spans) n += s.length();
  return n;
}

Flags MaskPlan::indicator() const {
  Flags f(static_cast<std::size_t>(seq_len), 0);
  for (const auto& s : spans) {
    std::fill(f.begin() + s.start, f.begin() + s.end, std::uint8_t{1});
  }
  return f;
}

void MaskPlan::add(FrameSpan span) {
  if (span.start < 0 || span.end > seq_len || span.start >= span.end) {
    throw Error(ErrorCode::kInvalidSpan, "mask span outside the sequence");
  }
  spans.push_back(span);
  std::sort(spans.begin(), spans.end(), [](auto a, auto b) { return a.start < b.start; });
  std::vector<FrameSpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  spans = std::move(merged);
}

MaskPlan sample_mask_plan(int seq_len, int mask_length, Rng& rng) {
  if (seq_len < 8) throw Error(ErrorCode::kInvalidArgument, "mask plans need seq_len >= 8");
  if (mask_length < 1) throw Error(ErrorCode::kInvalidArgument, "mask length must be >= 1");

  const int max_masked = static_cast<int>(std::floor(kMaskFractionHigh * seq_len));
  const int target = (seq_len + 1) / 2;
  int m = mask_length;
  if (m > max_masked) m = (seq_len + 1) / 2;

  MaskPlan plan;
  plan.seq_len = seq_len;
  int masked = 0;
  int attempts = 0;
  while (masked < target) {
    const int len = std::min(m, max_masked - masked);
    const int start = std::uniform_int_distribution<int>(0, seq_len - len)(rng);
    plan.add({start, start + len});
    masked = plan.masked_count();
    if (++attempts > 64 * seq_len) {
      // Fill the lowest unmasked frames; only reachable with pathological RNGs.
      const Flags f = plan.indicator();
      for (int i = 0; i < seq_len && masked < target; ++i) {
        if (!f[static_cast<std::size_t>(i)]) {
          plan.add({i, i + 1});
          ++masked;
        }
      }
    }
  }
  return plan;
}

MaskedTrack apply_mask(const TokenTrack& tt, const MaskPlan& plan) {
  if (plan.seq_len != tt.num_frames()) {
    throw Error(ErrorCode::kAlignment, "mask plan length " + std::to_string(plan.seq_len) +
                                           " differs from track length " + std::to_string(tt.num_frames()));
  }
  MaskedTrack out{tt, tt, plan.indicator()};
  for (int s = 0; s < kNumStreams; ++s) {
    for (const auto& span : plan.spans) {
      std::fill(out.corrupted[s].begin() + span.start, out.corrupted[s].begin() + span.end, tt.mask_token(s));
    }
  }
  return out;
}

}  // namespace mpm
