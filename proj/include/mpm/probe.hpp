#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpm/nn/conformer.hpp"
#include "mpm/types.hpp"

namespace mpm {

enum class ProbeKind { kLinear, kConformer };
enum class Granularity { kFrame, kSpan, kUtterance };

std::string to_string(ProbeKind k);
std::string to_string(Granularity g);
ProbeKind parse_probe_kind(const std::string& s);
Granularity parse_granularity(const std::string& s);

struct ProbeSpec {
  ProbeKind kind = ProbeKind::kLinear;
  Granularity granularity = Granularity::kUtterance;
  int input_dim = 0;  // per-frame feature width
  int num_classes = 2;
  // Conformer probe shape.
  int conformer_dim = 96;
  int conformer_blocks = 2;
  int conformer_heads = 4;
  int conformer_feedforward_dim = 384;
  int conformer_kernel_size = 7;

  void validate() const;
};

struct ProbeTrainConfig {
  int steps = 1000;
  int batch_size = 32;
  double peak_lr = 4e-5;
  int warmup_steps = 100;
  double weight_decay = 0.01;

  void validate() const;
};

/// One utterance of frozen features with labels at the task granularity:
/// one per frame, one per span, or a single utterance label.
struct ProbeSequence {
  MatrixXf frames;
  std::vector<FrameSpan> spans;
  std::vector<int> labels;
};

/// Linear-probe inputs: frame rows as-is, spans and whole utterances as
/// [mean | max] over their frames. Labels are flattened in the same order.
MatrixXf pool_examples(const std::vector<ProbeSequence>& data, Granularity g, std::vector<int>* labels = nullptr);

struct Predictions {
  std::vector<int> labels;
  MatrixXf probabilities;  // examples x num_classes, rows sum to 1
};

class ProbeModel {
 public:
  const ProbeSpec& spec() const { return spec_; }
  int num_parameters() const;

  /// Flattened example order matches pool_examples.
  Predictions predict(const std::vector<ProbeSequence>& data) const;
  /// Linear probes only: rows already pooled.
  Predictions predict(const MatrixXf& features) const;

  struct Net {
    nn::Linear<float> input;
    std::vector<nn::ConformerBlock<float>> blocks;
    nn::Linear<float> head;

    template <typename F>
    void visit(const std::string& p, F&& f) {
      if (input.in_dim() > 0) input.visit(nn::join_name(p, "input"), f);
      for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit(nn::join_name(p, "blocks." + std::to_string(i)), f);
      head.visit(nn::join_name(p, "head"), f);
    }
  };

 private:
  friend ProbeModel train_probe(const std::vector<ProbeSequence>&, const ProbeSpec&, const ProbeTrainConfig&,
                                std::uint64_t);
  friend ProbeModel train_probe(const MatrixXf&, const std::vector<int>&, const ProbeSpec&, const ProbeTrainConfig&,
                                std::uint64_t);

  ProbeSpec spec_;
  Net net_;
};

/// Linear probes are zero-initialized; conformer probes draw their initial
/// weights from `seed`, which also drives batch order. Features are frozen
/// inputs: nothing flows back to whatever produced them.
ProbeModel train_probe(const std::vector<ProbeSequence>& train, const ProbeSpec& spec, const ProbeTrainConfig& cfg,
                       std::uint64_t seed);
ProbeModel train_probe(const MatrixXf& features, const std::vector<int>& labels, const ProbeSpec& spec,
                       const ProbeTrainConfig& cfg, std::uint64_t seed);

}  // namespace mpm
