#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mpm/checkpoint.hpp"
#include "mpm/feature_cache.hpp"
#include "mpm/masking.hpp"
#include "mpm/mpm_model.hpp"

namespace mpm {

struct TrainConfig {
  int steps = 2000;
  int batch_size = 32;
  double peak_lr = 1e-4;
  int warmup_steps = 100;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  int log_every = 10;
  // Abort when the loss stays above factor x initial for `patience` steps.
  double divergence_factor = 10.0;
  int divergence_patience = 100;

  void validate() const;
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
  double masked_accuracy = 0.0;  // mean over the three streams
  int mask_length = 0;
};

struct TrainResult {
  MpmModel<float> model;
  MpmCheckpoint checkpoint;
  std::vector<LossPoint> curve;          // every log_every steps
  std::vector<int> batch_mask_lengths;   // one per step
  std::vector<double> step_losses;       // one per step
  std::vector<double> step_accuracies;   // one per step
};

using ProgressFn = std::function<void(const LossPoint&)>;

/// Trains from scratch. Deterministic given train_cfg.seed: batches are
/// drawn, masked and reduced in a fixed order on one thread.
TrainResult train_mpm(const std::vector<TokenTrack>& corpus, const Codebooks& codebooks,
                      const MaskConfig& mask_cfg, const TrainConfig& train_cfg, const MpmConfig& model_cfg,
                      const ProgressFn& progress = {});

/// Loads every prosody record of the cache and tokenizes it.
std::vector<TokenTrack> load_token_corpus(const FeatureCache& cache, const Codebooks& codebooks);

/// One optimisation step's worth of loss/gradient over a batch of masked
/// tracks: the per-stream mean runs over every masked frame in the batch.
template <typename Scalar>
LossTerms batch_loss_and_gradients(MpmModel<Scalar>& model, const std::vector<MaskedTrack>& batch,
                                   double* masked_accuracy = nullptr);

struct GradCheckOptions {
  double eps = 1e-5;
  int num_checks = 200;
  int seq_len = 10;
  std::uint64_t seed = 7;
  // Only parameters whose name starts with this prefix are probed.
  std::string name_prefix;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  std::string worst_parameter;
};

/// Central finite differences against analytic gradients, double precision.
GradCheckResult grad_check(const MpmConfig& tiny_cfg, const GradCheckOptions& opts = {});

}  // namespace mpm
