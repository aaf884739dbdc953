#include "mpm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mpm/error.hpp"
#include "mpm/nn/optimizer.hpp"

namespace mpm {

void TrainConfig::validate() const {
  if (steps < 1) throw Error(ErrorCode::kConfig, "steps must be positive");
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be positive");
  if (warmup_steps < 0 || warmup_steps >= steps) throw Error(ErrorCode::kConfig, "warmup must be < steps");
  if (!(peak_lr > 0.0)) throw Error(ErrorCode::kConfig, "peak_lr must be positive");
  if (log_every < 1) throw Error(ErrorCode::kConfig, "log_every must be positive");
}

template <typename Scalar>
LossTerms batch_loss_and_gradients(MpmModel<Scalar>& model, const std::vector<MaskedTrack>& batch,
                                   double* masked_accuracy) {
  std::size_t total_masked = 0;
  for (const auto& item : batch) {
    for (auto m : item.masked) total_masked += m ? 1 : 0;
  }
  if (total_masked == 0) throw Error(ErrorCode::kUndefinedLoss, "batch has no masked positions");

  LossTerms terms;
  std::size_t correct = 0;
  typename MpmModel<Scalar>::Cache cache;
  StreamMatrices<Scalar> dlogits;
  for (const auto& item : batch) {
    const auto out = model.forward(item.corrupted, &cache);
    for (int s = 0; s < kNumStreams; ++s) {
      const double w = 1.0 / (static_cast<double>(total_masked) * std::log(static_cast<double>(out.logits[s].cols())));
      const double part = masked_cross_entropy(out.logits[s], item.targets[s], item.masked, w, &dlogits[s]);
      terms.per_feature[s] += part;
      terms.total += part;
      if (masked_accuracy) {
        for (int t = 0; t < item.corrupted.num_frames(); ++t) {
          if (!item.masked[static_cast<std::size_t>(t)]) continue;
          Eigen::Index arg = 0;
          out.logits[s].row(t).maxCoeff(&arg);
          correct += (arg == item.targets[s][static_cast<std::size_t>(t)]) ? 1 : 0;
        }
      }
    }
    model.backward(dlogits, cache);
  }
  if (masked_accuracy) {
    *masked_accuracy = static_cast<double>(correct) / static_cast<double>(kNumStreams * total_masked);
  }
  return terms;
}

template LossTerms batch_loss_and_gradients<float>(MpmModel<float>&, const std::vector<MaskedTrack>&, double*);
template LossTerms batch_loss_and_gradients<double>(MpmModel<double>&, const std::vector<MaskedTrack>&, double*);

namespace {

TokenTrack crop(const TokenTrack& tt, int start, int len) {
  TokenTrack out;
  out.vocab = tt.vocab;
  for (int s = 0; s < kNumStreams; ++s) {
    out[s].assign(tt[s].begin() + start, tt[s].begin() + start + len);
  }
  return out;
}

}  // namespace

TrainResult train_mpm(const std::vector<TokenTrack>& corpus, const Codebooks& codebooks, const MaskConfig& mask_cfg,
                      const TrainConfig& train_cfg, const MpmConfig& model_cfg, const ProgressFn& progress) {
  train_cfg.validate();
  model_cfg.validate();
  if (codebooks.sizes() != model_cfg.codebook_sizes) {
    throw Error(ErrorCode::kConfig, "codebook sizes differ from the model configuration");
  }
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].num_frames() >= 8) usable.push_back(i);
  }
  if (usable.empty()) throw Error(ErrorCode::kEmptyInput, "training corpus has no utterance of >= 8 frames");

  TrainResult result{MpmModel<float>(model_cfg), {}, {}, {}, {}, {}};
  MpmModel<float>& model = result.model;
  model.init(train_cfg.seed);

  Rng rng(train_cfg.seed * 0x9E3779B97F4A7C15ull + 1);
  nn::AdamW<float> opt(train_cfg.weight_decay);
  const nn::LinearSchedule schedule{train_cfg.peak_lr, train_cfg.warmup_steps, train_cfg.steps};

  std::vector<std::size_t> order = usable;
  std::size_t cursor = order.size();
  auto next_index = [&]() {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  double initial = 0.0;
  int above = 0;
  std::vector<MaskedTrack> batch;
  for (int step = 0; step < train_cfg.steps; ++step) {
    const int m = mask_cfg.draw_length(rng);
    batch.clear();
    for (int b = 0; b < train_cfg.batch_size; ++b) {
      const TokenTrack& full = corpus[next_index()];
      TokenTrack tt = full;
      if (full.num_frames() > model_cfg.max_seq_frames) {
        const int start =
            std::uniform_int_distribution<int>(0, full.num_frames() - model_cfg.max_seq_frames)(rng);
        tt = crop(full, start, model_cfg.max_seq_frames);
      }
      const MaskPlan plan = sample_mask_plan(tt.num_frames(), m, rng);
      batch.push_back(apply_mask(tt, plan));
    }

    model.zero_grad();
    double acc = 0.0;
    const LossTerms terms = batch_loss_and_gradients(model, batch, &acc);
    if (!std::isfinite(terms.total)) {
      throw Error(ErrorCode::kDivergence, "non-finite loss at step " + std::to_string(step));
    }
    check_finite_gradients(model);
    opt.step(model, schedule.at(step));

    result.batch_mask_lengths.push_back(m);
    result.step_losses.push_back(terms.total);
    result.step_accuracies.push_back(acc);
    if (step == 0) initial = terms.total;
    above = terms.total > train_cfg.divergence_factor * initial ? above + 1 : 0;
    if (above >= train_cfg.divergence_patience) {
      std::ostringstream msg;
      msg << "loss " << terms.total << " above " << train_cfg.divergence_factor << "x initial (" << initial
          << ") for " << above << " steps at step " << step;
      throw Error(ErrorCode::kDivergence, msg.str());
    }
    if ((step + 1) % train_cfg.log_every == 0 || step + 1 == train_cfg.steps) {
      LossPoint p{step + 1, terms.total, acc, m};
      result.curve.push_back(p);
      if (progress) progress(p);
    }
  }

  TrainingMetadata meta;
  meta.steps_completed = train_cfg.steps;
  meta.final_loss = result.step_losses.back();
  meta.seed = train_cfg.seed;
  meta.mask_strategy = mask_cfg.name();
  meta.batch_size = train_cfg.batch_size;
  std::ostringstream note;
  note << "desk scale: " << train_cfg.steps << " steps, batch " << train_cfg.batch_size << ", "
       << model_cfg.num_layers << " layers, extraction layer " << model_cfg.resolved_extraction_layer()
       << " (reference: 10k steps, batch 256, layer 8)";
  meta.regime_note = note.str();
  result.checkpoint = make_checkpoint(model, codebooks, meta);
  return result;
}

std::vector<TokenTrack> load_token_corpus(const FeatureCache& cache, const Codebooks& codebooks) {
  std::vector<TokenTrack> out;
  out.reserve(cache.entries().size());
  for (const auto& e : cache.entries()) out.push_back(tokenize(cache.get(e.id), codebooks));
  return out;
}

GradCheckResult grad_check(const MpmConfig& cfg, const GradCheckOptions& opts) {
  MpmModel<double> model(cfg);
  model.init(opts.seed);
  Rng rng(opts.seed + 17);

  TokenTrack tt;
  tt.vocab = cfg.codebook_sizes;
  for (int s = 0; s < kNumStreams; ++s) {
    std::uniform_int_distribution<int> tok(0, cfg.codebook_sizes[s] - 1);
    for (int t = 0; t < opts.seq_len; ++t) tt[s].push_back(tok(rng));
  }
  const MaskPlan plan = sample_mask_plan(opts.seq_len, 3, rng);
  const MaskedTrack item = apply_mask(tt, plan);

  auto loss_at = [&]() {
    const auto out = model.forward(item.corrupted);
    return mpm_loss(out.logits, item.targets, item.masked).total;
  };

  model.zero_grad();
  typename MpmModel<double>::Cache cache;
  const auto out = model.forward(item.corrupted, &cache);
  StreamMatrices<double> dlogits;
  mpm_loss(out.logits, item.targets, item.masked, &dlogits);
  model.backward(dlogits, cache);

  struct Slot {
    std::string name;
    nn::Parameter<double>* param;
  };
  std::vector<Slot> slots;
  std::vector<Eigen::Index> cumulative;
  Eigen::Index total = 0;
  model.visit("", [&](const std::string& name, nn::Parameter<double>& p) {
    if (name.rfind(opts.name_prefix, 0) != 0) return;
    slots.push_back({name, &p});
    total += p.size();
    cumulative.push_back(total);
  });
  if (total == 0) throw Error(ErrorCode::kInvalidArgument, "no parameters match '" + opts.name_prefix + "'");

  GradCheckResult result;
  std::uniform_int_distribution<Eigen::Index> pick(0, total - 1);
  for (int n = 0; n < opts.num_checks; ++n) {
    const Eigen::Index flat = pick(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), flat);
    const auto k = static_cast<std::size_t>(it - cumulative.begin());
    const Eigen::Index local = flat - (k == 0 ? 0 : cumulative[k - 1]);
    double& v = slots[k].param->value.data()[local];
    const double analytic = slots[k].param->grad.data()[local];
    const double saved = v;
    v = saved + opts.eps;
    const double up = loss_at();
    v = saved - opts.eps;
    const double down = loss_at();
    v = saved;
    const double numeric = (up - down) / (2.0 * opts.eps);
    // Gradients below 1e-6 (e.g. key biases, which softmax ignores) are
    // compared absolutely; their finite differences are pure roundoff.
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = slots[k].name;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace mpm
