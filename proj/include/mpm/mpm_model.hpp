#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mpm/codec.hpp"
#include "mpm/error.hpp"
#include "mpm/nn/conformer.hpp"

namespace mpm {

struct MpmConfig {
  int num_layers = 4;
  int model_dim = 128;
  int num_heads = 4;
  int conv_kernel_size = 7;
  int feedforward_dim = 512;
  std::array<int, kNumStreams> codebook_sizes{128, 128, 128};
  int max_seq_frames = 600;
  // 0 selects ceil(2 * num_layers / 3).
  int extraction_layer = 0;

  int resolved_extraction_layer() const {
    return extraction_layer > 0 ? extraction_layer : (2 * num_layers + 2) / 3;
  }

  nn::BlockShape block_shape() const { return {model_dim, num_heads, feedforward_dim, conv_kernel_size}; }

  /// num_layers may be 0 (embedding + heads only), which is useful for
  /// gradient checks but has no extractable layer.
  void validate() const {
    if (num_layers < 0) throw Error(ErrorCode::kConfig, "num_layers must be >= 0");
    if (model_dim <= 0 || num_heads <= 0 || model_dim % num_heads != 0) {
      throw Error(ErrorCode::kConfig, "model_dim must be a positive multiple of num_heads");
    }
    if (feedforward_dim <= 0) throw Error(ErrorCode::kConfig, "feedforward_dim must be positive");
    if (conv_kernel_size < 1 || conv_kernel_size % 2 == 0) {
      throw Error(ErrorCode::kConfig, "conv_kernel_size must be odd");
    }
    for (int c : codebook_sizes) {
      if (c < 2) throw Error(ErrorCode::kConfig, "codebook sizes must be >= 2");
    }
    if (max_seq_frames < 1) throw Error(ErrorCode::kConfig, "max_seq_frames must be positive");
    if (num_layers > 0) {
      const int l = resolved_extraction_layer();
      if (l < 1 || l > num_layers) throw Error(ErrorCode::kConfig, "extraction_layer outside [1, num_layers]");
    }
  }

  friend bool operator==(const MpmConfig&, const MpmConfig&) = default;
};

template <typename Scalar>
using StreamMatrices = std::array<Matrix<Scalar>, kNumStreams>;

/// Masked prosody model: the sum of three token embeddings plus sinusoidal
/// positions feeds a Conformer stack; three linear heads predict the
/// codebook index of each stream.
template <typename Scalar>
class MpmModel {
 public:
  struct Output {
    StreamMatrices<Scalar> logits;       // frames x c_s
    std::vector<Matrix<Scalar>> hidden;  // hidden[l - 1] = output of block l
  };

  struct Cache {
    TokenTrack input;
    std::vector<typename nn::ConformerBlock<Scalar>::Cache> blocks;
    std::array<typename nn::Linear<Scalar>::Cache, kNumStreams> heads;
  };

  MpmModel() = default;

  explicit MpmModel(const MpmConfig& cfg) : config_(cfg) {
    cfg.validate();
    positions_ = nn::sinusoidal_positions<Scalar>(cfg.max_seq_frames, cfg.model_dim);
    for (int s = 0; s < kNumStreams; ++s) {
      embeddings_[s] = nn::Parameter<Scalar>(cfg.codebook_sizes[s] + 1, cfg.model_dim);
      heads_[s] = nn::Linear<Scalar>(cfg.model_dim, cfg.codebook_sizes[s]);
    }
    blocks_.reserve(static_cast<std::size_t>(cfg.num_layers));
    for (int l = 0; l < cfg.num_layers; ++l) blocks_.emplace_back(cfg.block_shape());
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& e : embeddings_) nn::fill_normal(e.value, 1.0, rng);
    for (auto& b : blocks_) b.init(rng);
    for (auto& h : heads_) h.init(rng);
  }

  const MpmConfig& config() const { return config_; }

  /// Hidden states for layers 1..stop_layer (all layers by default).
  Output forward(const TokenTrack& tt, Cache* cache = nullptr, int stop_layer = -1) const {
    check_input(tt);
    const int T = tt.num_frames();
    Matrix<Scalar> x = positions_.topRows(T);
    for (int s = 0; s < kNumStreams; ++s) {
      for (int t = 0; t < T; ++t) x.row(t) += embeddings_[s].value.row(tt[s][static_cast<std::size_t>(t)]);
    }
    const int layers = stop_layer < 0 ? config_.num_layers : stop_layer;
    Output out;
    if (cache) {
      cache->input = tt;
      cache->blocks.resize(blocks_.size());
    }
    for (int l = 0; l < layers; ++l) {
      x = blocks_[static_cast<std::size_t>(l)].forward(x, cache ? &cache->blocks[static_cast<std::size_t>(l)] : nullptr);
      out.hidden.push_back(x);
    }
    if (layers == config_.num_layers) {
      for (int s = 0; s < kNumStreams; ++s) {
        out.logits[s] = heads_[s].forward(x, cache ? &cache->heads[s] : nullptr);
      }
    }
    return out;
  }

  /// Accumulates parameter gradients given d(loss)/d(logits).
  void backward(const StreamMatrices<Scalar>& dlogits, const Cache& cache) {
    Matrix<Scalar> dx = heads_[0].backward(dlogits[0], cache.heads[0]);
    for (int s = 1; s < kNumStreams; ++s) dx += heads_[s].backward(dlogits[s], cache.heads[s]);
    for (int l = config_.num_layers - 1; l >= 0; --l) {
      dx = blocks_[static_cast<std::size_t>(l)].backward(dx, cache.blocks[static_cast<std::size_t>(l)]);
    }
    const TokenTrack& tt = cache.input;
    for (int s = 0; s < kNumStreams; ++s) {
      for (int t = 0; t < tt.num_frames(); ++t) {
        embeddings_[s].grad.row(tt[s][static_cast<std::size_t>(t)]) += dx.row(t);
      }
    }
  }

  /// Output of block `layer` (1-based) on clean input.
  Matrix<Scalar> encode(const TokenTrack& tt, int layer) const {
    if (layer < 1 || layer > config_.num_layers) {
      throw Error(ErrorCode::kLayerOutOfRange, "layer " + std::to_string(layer) + " outside [1, " +
                                                   std::to_string(config_.num_layers) + "]");
    }
    return std::move(forward(tt, nullptr, layer).hidden.back());
  }

  void zero_grad() {
    visit("", [](const std::string&, nn::Parameter<Scalar>& p) { p.zero_grad(); });
  }

  template <typename F>
  void visit(const std::string& p, F&& f) {
    static constexpr const char* kStreamNames[kNumStreams] = {"pitch", "energy", "vad"};
    for (int s = 0; s < kNumStreams; ++s) {
      f(nn::join_name(p, std::string("embed.") + kStreamNames[s]), embeddings_[s]);
    }
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      blocks_[l].visit(nn::join_name(p, "blocks." + std::to_string(l)), f);
    }
    for (int s = 0; s < kNumStreams; ++s) {
      heads_[s].visit(nn::join_name(p, std::string("head.") + kStreamNames[s]), f);
    }
  }

  template <typename F>
  void visit(const std::string& p, F&& f) const {
    const_cast<MpmModel*>(this)->visit(p, [&](const std::string& n, nn::Parameter<Scalar>& prm) {
      f(n, static_cast<const nn::Parameter<Scalar>&>(prm));
    });
  }

  Eigen::Index num_parameters() const {
    Eigen::Index n = 0;
    visit("", [&](const std::string&, const nn::Parameter<Scalar>& p) { n += p.size(); });
    return n;
  }

  /// Same architecture and values in another scalar type.
  template <typename Other>
  MpmModel<Other> cast() const {
    MpmModel<Other> out(config_);
    std::vector<const Matrix<Scalar>*> src;
    visit("", [&](const std::string&, const nn::Parameter<Scalar>& p) { src.push_back(&p.value); });
    std::size_t i = 0;
    out.visit("", [&](const std::string&, nn::Parameter<Other>& p) { p.value = src[i++]->template cast<Other>(); });
    return out;
  }

 private:
  void check_input(const TokenTrack& tt) const {
    if (tt.num_frames() > config_.max_seq_frames) {
      throw Error(ErrorCode::kLength, "sequence of " + std::to_string(tt.num_frames()) + " frames exceeds " +
                                          std::to_string(config_.max_seq_frames));
    }
    if (tt.num_frames() == 0) throw Error(ErrorCode::kLength, "empty sequence");
    for (int s = 0; s < kNumStreams; ++s) {
      if (tt[s].size() != static_cast<std::size_t>(tt.num_frames())) {
        throw Error(ErrorCode::kAlignment, "token streams differ in length");
      }
      for (int tok : tt[s]) {
        if (tok < 0 || tok > config_.codebook_sizes[s]) {
          throw Error(ErrorCode::kInvalidToken, "token " + std::to_string(tok) + " outside vocabulary");
        }
      }
    }
  }

  MpmConfig config_;
  Matrix<Scalar> positions_;
  std::array<nn::Parameter<Scalar>, kNumStreams> embeddings_;
  std::vector<nn::ConformerBlock<Scalar>> blocks_;
  std::array<nn::Linear<Scalar>, kNumStreams> heads_;
};

struct LossTerms {
  double total = 0.0;
  std::array<double, kNumStreams> per_feature{};
};

/// Sum over masked rows of -log softmax(logits)[target], each term weighted
/// by `weight`. When `dlogits` is given, weight * (softmax - onehot) is
/// written at masked rows and zero elsewhere.
template <typename Scalar>
double masked_cross_entropy(const Matrix<Scalar>& logits, const Tokens& targets, const Flags& masked,
                            double weight, Matrix<Scalar>* dlogits) {
  const Eigen::Index T = logits.rows(), C = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != T || static_cast<Eigen::Index>(masked.size()) != T) {
    throw Error(ErrorCode::kAlignment, "logits, targets and mask differ in length");
  }
  if (dlogits) dlogits->setZero(T, C);
  double sum = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!masked[static_cast<std::size_t>(t)]) continue;
    const int y = targets[static_cast<std::size_t>(t)];
    if (y < 0 || y >= C) throw Error(ErrorCode::kInvalidToken, "target outside the codebook");
    const auto row = logits.row(t);
    const double mx = static_cast<double>(row.maxCoeff());
    double z = 0.0;
    for (Eigen::Index k = 0; k < C; ++k) z += std::exp(static_cast<double>(row(k)) - mx);
    const double log_z = mx + std::log(z);
    sum += log_z - static_cast<double>(row(y));
    if (dlogits) {
      for (Eigen::Index k = 0; k < C; ++k) {
        const double p = std::exp(static_cast<double>(row(k)) - log_z);
        (*dlogits)(t, k) = static_cast<Scalar>(weight * (p - (k == y ? 1.0 : 0.0)));
      }
    }
  }
  return weight * sum;
}

/// Per stream: mean cross-entropy over masked frames divided by ln(c_s);
/// total is the sum of the three. `grad_scale` multiplies the gradient.
template <typename Scalar>
LossTerms mpm_loss(const StreamMatrices<Scalar>& logits, const TokenTrack& targets, const Flags& masked,
                   StreamMatrices<Scalar>* dlogits = nullptr, double grad_scale = 1.0) {
  std::size_t count = 0;
  for (auto m : masked) count += m ? 1 : 0;
  if (count == 0) throw Error(ErrorCode::kUndefinedLoss, "no masked positions");
  LossTerms out;
  for (int s = 0; s < kNumStreams; ++s) {
    const auto c = static_cast<double>(logits[s].cols());
    const double w = 1.0 / (static_cast<double>(count) * std::log(c));
    out.per_feature[s] =
        masked_cross_entropy(logits[s], targets[s], masked, w, dlogits ? &(*dlogits)[s] : nullptr);
    if (dlogits && grad_scale != 1.0) (*dlogits)[s] *= static_cast<Scalar>(grad_scale);
    out.total += out.per_feature[s];
  }
  return out;
}

/// Throws kNonFiniteGradient naming the first parameter with a NaN/Inf gradient.
template <typename Scalar>
void check_finite_gradients(const MpmModel<Scalar>& model) {
  model.visit("", [](const std::string& name, const nn::Parameter<Scalar>& p) {
    if (!p.grad.allFinite()) throw Error(ErrorCode::kNonFiniteGradient, "gradient of " + name + " is not finite");
  });
}

/// Hidden state of `layer` (default: the configured extraction layer) for
/// an unmasked track.
template <typename Scalar>
Matrix<Scalar> extract_representations(const MpmModel<Scalar>& model, const TokenTrack& tt, int layer = 0) {
  return model.encode(tt, layer > 0 ? layer : model.config().resolved_extraction_layer());
}

/// Per span, [mean over frames | element-wise max over frames].
template <typename Derived>
Matrix<typename Derived::Scalar> aggregate_spans(const Eigen::MatrixBase<Derived>& frames,
                                                 const std::vector<FrameSpan>& spans) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index dim = frames.cols();
  Matrix<Scalar> out(static_cast<Eigen::Index>(spans.size()), 2 * dim);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const FrameSpan& s = spans[i];
    if (s.start < 0 || s.end > frames.rows() || s.start >= s.end) {
      throw Error(ErrorCode::kInvalidSpan, "span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                               ") invalid for " + std::to_string(frames.rows()) + " frames");
    }
    const auto block = frames.middleRows(s.start, s.length());
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r).head(dim) = block.colwise().mean();
    out.row(r).tail(dim) = block.colwise().maxCoeff();
  }
  return out;
}

}  // namespace mpm
