#include "mpm/codec.hpp"

#include <cmath>

#include "mpm/error.hpp"

namespace mpm {

Codebook::Codebook(int size, double lower_clip, double upper_clip)
    : size_(size), lower_(lower_clip), upper_(upper_clip), edges_(size + 1) {
  for (int i = 0; i <= size; ++i) {
    edges_(i) = lower_ + (upper_ - lower_) * static_cast<double>(i) / size;
  }
  edges_(0) = lower_;
  edges_(size) = upper_;
}

int Codebook::quantize(double v) const {
  if (v < lower_) return 0;
  if (v >= upper_) return size_ - 1;
  int idx = static_cast<int>(std::floor((v - lower_) / bin_width()));
  idx = std::clamp(idx, 0, size_ - 1);
  // Settle floating-point disagreements against the stored edges.
  while (idx + 1 < size_ && v >= edges_(idx + 1)) ++idx;
  while (idx > 0 && v < edges_(idx)) --idx;
  return idx;
}

double Codebook::center(int token) const {
  if (token < 0 || token >= size_) {
    throw Error(ErrorCode::kInvalidToken, "token " + std::to_string(token) + " outside codebook of size " +
                                              std::to_string(size_));
  }
  return 0.5 * (edges_(token) + edges_(token + 1));
}

Codebook build_codebook(int c, double lower_clip, double upper_clip) {
  if (c < 2) throw Error(ErrorCode::kInvalidCodebook, "codebook needs at least 2 bins");
  if (!(lower_clip < upper_clip) || !std::isfinite(lower_clip) || !std::isfinite(upper_clip)) {
    throw Error(ErrorCode::kInvalidCodebook, "codebook support must satisfy lower < upper");
  }
  return Codebook(c, lower_clip, upper_clip);
}

Tokens quantize(const Eigen::VectorXd& values, const Codebook& cb) {
  Tokens out(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) out[static_cast<std::size_t>(i)] = cb.quantize(values(i));
  return out;
}

Eigen::VectorXd dequantize(const Tokens& tokens, const Codebook& cb) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) out(static_cast<Eigen::Index>(i)) = cb.center(tokens[i]);
  return out;
}

Codebooks default_codebooks(int c) {
  return Codebooks{{build_codebook(c, -3.0, 3.0), build_codebook(c, -3.0, 3.0), build_codebook(c, 0.0, 1.0)}};
}

TokenTrack tokenize(const ProsodyTrack& track, const Codebooks& cbs) {
  const int n = track.num_frames();
  if (track.pitch.size() != n || track.energy.size() != n) {
    throw Error(ErrorCode::kAlignment, "prosody contours differ in length");
  }
  TokenTrack tt;
  tt.vocab = cbs.sizes();
  tt[kPitch] = quantize(track.pitch, cbs[kPitch]);
  tt[kEnergy] = quantize(track.energy, cbs[kEnergy]);
  Eigen::VectorXd vad(n);
  for (int i = 0; i < n; ++i) vad(i) = track.vad[static_cast<std::size_t>(i)];
  tt[kVad] = quantize(vad, cbs[kVad]);
  return tt;
}

void validate_tokens(const TokenTrack& tt) {
  const auto n = tt.streams[0].size();
  for (int s = 0; s < kNumStreams; ++s) {
    if (tt[s].size() != n) throw Error(ErrorCode::kAlignment, "token streams differ in length");
    for (int t : tt[s]) {
      if (t < 0 || t > tt.mask_token(s)) {
        throw Error(ErrorCode::kInvalidToken, "token " + std::to_string(t) + " out of range");
      }
    }
  }
}

}  // namespace mpm
