#pragma once

#include <array>

#include <Eigen/Core>

#include "mpm/signal_features.hpp"
#include "mpm/types.hpp"

namespace mpm {

/// c uniform-width bins over [lower_clip, upper_clip]; values outside the
/// support clip to the end bins.
class Codebook {
 public:
  Codebook() = default;
  Codebook(int size, double lower_clip, double upper_clip);

  int size() const { return size_; }
  double lower_clip() const { return lower_; }
  double upper_clip() const { return upper_; }
  double bin_width() const { return (upper_ - lower_) / size_; }
  const Eigen::VectorXd& edges() const { return edges_; }

  int quantize(double v) const;
  double center(int token) const;

 private:
  int size_ = 0;
  double lower_ = 0.0;
  double upper_ = 0.0;
  Eigen::VectorXd edges_;
};

/// Throws kInvalidCodebook when c < 2 or the support is empty.
Codebook build_codebook(int c, double lower_clip, double upper_clip);

Tokens quantize(const Eigen::VectorXd& values, const Codebook& cb);

/// Bin centres; throws kInvalidToken for the mask token or anything outside [0, c).
Eigen::VectorXd dequantize(const Tokens& tokens, const Codebook& cb);

enum Stream : int { kPitch = 0, kEnergy = 1, kVad = 2 };
inline constexpr int kNumStreams = 3;

struct Codebooks {
  std::array<Codebook, kNumStreams> books;

  const Codebook& operator[](int s) const { return books[static_cast<std::size_t>(s)]; }
  std::array<int, kNumStreams> sizes() const {
    return {books[0].size(), books[1].size(), books[2].size()};
  }
};

/// Pitch and energy on [-3, 3]; vad on [0, 1] so 0/1 land in the end bins.
Codebooks default_codebooks(int c);

/// Three aligned token streams. Token vocab[s] is the mask token of stream s.
struct TokenTrack {
  std::array<Tokens, kNumStreams> streams;
  std::array<int, kNumStreams> vocab{};

  int num_frames() const { return static_cast<int>(streams[0].size()); }
  const Tokens& operator[](int s) const { return streams[static_cast<std::size_t>(s)]; }
  Tokens& operator[](int s) { return streams[static_cast<std::size_t>(s)]; }
  int mask_token(int s) const { return vocab[static_cast<std::size_t>(s)]; }
};

TokenTrack tokenize(const ProsodyTrack& track, const Codebooks& cbs);

/// Throws kAlignment / kInvalidToken when the invariants of TokenTrack fail.
void validate_tokens(const TokenTrack& tt);

}  // namespace mpm
