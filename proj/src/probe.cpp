#include "mpm/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mpm/error.hpp"
#include "mpm/mpm_model.hpp"
#include "mpm/nn/optimizer.hpp"

namespace mpm {

std::string to_string(ProbeKind k) { return k == ProbeKind::kLinear ? "linear" : "conformer"; }

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::kFrame:
      return "frame";
    case Granularity::kSpan:
      return "span";
    case Granularity::kUtterance:
      break;
  }
  return "utterance";
}

ProbeKind parse_probe_kind(const std::string& s) {
  if (s == "linear") return ProbeKind::kLinear;
  if (s == "conformer") return ProbeKind::kConformer;
  throw Error(ErrorCode::kConfig, "unknown probe kind '" + s + "'");
}

Granularity parse_granularity(const std::string& s) {
  if (s == "frame") return Granularity::kFrame;
  if (s == "span") return Granularity::kSpan;
  if (s == "utterance") return Granularity::kUtterance;
  throw Error(ErrorCode::kConfig, "unknown granularity '" + s + "'");
}

void ProbeSpec::validate() const {
  if (num_classes < 2) throw Error(ErrorCode::kConfig, "probe needs at least two classes");
  if (input_dim < 1) throw Error(ErrorCode::kConfig, "probe input_dim must be positive");
  if (kind == ProbeKind::kConformer) {
    if (conformer_blocks < 1) throw Error(ErrorCode::kConfig, "conformer probe needs at least one block");
    if (conformer_dim % conformer_heads != 0) throw Error(ErrorCode::kConfig, "conformer_dim must divide by heads");
    if (conformer_kernel_size % 2 == 0) throw Error(ErrorCode::kConfig, "conformer kernel must be odd");
  }
}

void ProbeTrainConfig::validate() const {
  if (steps < 1 || batch_size < 1) throw Error(ErrorCode::kConfig, "probe steps and batch size must be positive");
  if (!(peak_lr > 0.0) || warmup_steps < 0 || warmup_steps > steps) {
    throw Error(ErrorCode::kConfig, "probe schedule is invalid");
  }
  if (weight_decay < 0.0) throw Error(ErrorCode::kConfig, "weight decay must be >= 0");
}

namespace {

void check_labels(const ProbeSequence& s, Granularity g) {
  const std::size_t want = g == Granularity::kFrame  ? static_cast<std::size_t>(s.frames.rows())
                           : g == Granularity::kSpan ? s.spans.size()
                                                     : 1;
  if (s.labels.size() != want) throw Error(ErrorCode::kAlignment, "probe labels do not match the task granularity");
}

std::vector<FrameSpan> pooling_spans(const ProbeSequence& s, Granularity g) {
  if (g == Granularity::kSpan) return s.spans;
  return {FrameSpan{0, static_cast<int>(s.frames.rows())}};
}

int pooled_width(const ProbeSpec& spec) {
  const int d = spec.kind == ProbeKind::kLinear ? spec.input_dim : spec.conformer_dim;
  if (spec.kind == ProbeKind::kConformer) return spec.granularity == Granularity::kSpan ? 2 * d : d;
  return spec.granularity == Granularity::kFrame ? d : 2 * d;
}

void check_training_labels(const std::vector<int>& labels, int num_classes) {
  std::set<int> seen;
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error(ErrorCode::kInvalidArgument, "probe label outside [0, num_classes)");
    seen.insert(y);
  }
  if (seen.size() < 2) throw Error(ErrorCode::kDegenerateLabels, "probe training data covers fewer than two classes");
}

/// Mean softmax cross-entropy; returns dlogits scaled by 1 / rows.
MatrixXf cross_entropy_grad(const MatrixXf& logits, const std::vector<int>& labels, double* loss) {
  MatrixXf p = nn::softmax_rows(logits);
  const float inv = 1.0f / static_cast<float>(logits.rows());
  double total = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    total -= std::log(std::max(static_cast<double>(p(r, y)), 1e-30));
    p(r, y) -= 1.0f;
  }
  if (loss) *loss = total / static_cast<double>(logits.rows());
  return p * inv;
}

struct SequenceCache {
  nn::Linear<float>::Cache input;
  std::vector<nn::ConformerBlock<float>::Cache> blocks;
  MatrixXf hidden;
  nn::Linear<float>::Cache head;
};

MatrixXf pool_hidden(const MatrixXf& h, Granularity g, const std::vector<FrameSpan>& spans) {
  if (g == Granularity::kFrame) return h;
  if (g == Granularity::kSpan) return aggregate_spans(h, spans);
  return h.colwise().mean();
}

MatrixXf unpool_grad(const MatrixXf& dpooled, const MatrixXf& h, Granularity g, const std::vector<FrameSpan>& spans) {
  if (g == Granularity::kFrame) return dpooled;
  MatrixXf dh = MatrixXf::Zero(h.rows(), h.cols());
  if (g == Granularity::kUtterance) {
    dh.rowwise() += dpooled.row(0) / static_cast<float>(h.rows());
    return dh;
  }
  const Eigen::Index d = h.cols();
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const FrameSpan& s = spans[i];
    const auto r = static_cast<Eigen::Index>(i);
    const auto len = static_cast<float>(s.length());
    for (int t = s.start; t < s.end; ++t) dh.row(t) += dpooled.block(r, 0, 1, d) / len;
    for (Eigen::Index c = 0; c < d; ++c) {
      Eigen::Index arg = 0;
      h.col(c).segment(s.start, s.length()).maxCoeff(&arg);
      dh(s.start + arg, c) += dpooled(r, d + c);
    }
  }
  return dh;
}

MatrixXf conformer_logits(const ProbeModel::Net& net, const ProbeSequence& s, Granularity g,
                          SequenceCache* cache) {
  MatrixXf h = net.input.forward(s.frames, cache ? &cache->input : nullptr);
  if (cache) cache->blocks.resize(net.blocks.size());
  for (std::size_t b = 0; b < net.blocks.size(); ++b) h = net.blocks[b].forward(h, cache ? &cache->blocks[b] : nullptr);
  const MatrixXf pooled = pool_hidden(h, g, s.spans);
  if (cache) cache->hidden = h;
  return net.head.forward(pooled, cache ? &cache->head : nullptr);
}

void zero_grads(ProbeModel::Net& net) {
  nn::for_each_parameter(net, [](const std::string&, nn::Parameter<float>& p) { p.zero_grad(); });
}

}  // namespace

MatrixXf pool_examples(const std::vector<ProbeSequence>& data, Granularity g, std::vector<int>* labels) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "no probe sequences");
  const Eigen::Index d = data.front().frames.cols();
  Eigen::Index rows = 0;
  for (const auto& s : data) {
    if (s.frames.cols() != d) throw Error(ErrorCode::kAlignment, "probe sequences differ in feature width");
    check_labels(s, g);
    rows += g == Granularity::kFrame ? s.frames.rows() : g == Granularity::kSpan ? static_cast<Eigen::Index>(s.spans.size()) : 1;
  }
  MatrixXf out(rows, g == Granularity::kFrame ? d : 2 * d);
  if (labels) labels->clear();
  Eigen::Index r = 0;
  for (const auto& s : data) {
    MatrixXf block = g == Granularity::kFrame ? s.frames : aggregate_spans(s.frames, pooling_spans(s, g));
    out.middleRows(r, block.rows()) = block;
    r += block.rows();
    if (labels) labels->insert(labels->end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

int ProbeModel::num_parameters() const {
  int n = 0;
  nn::for_each_parameter(const_cast<Net&>(net_),
                         [&](const std::string&, nn::Parameter<float>& p) { n += static_cast<int>(p.size()); });
  return n;
}

Predictions ProbeModel::predict(const MatrixXf& features) const {
  if (spec_.kind != ProbeKind::kLinear) throw Error(ErrorCode::kInvalidArgument, "pooled features need a linear probe");
  if (features.cols() != net_.head.in_dim()) throw Error(ErrorCode::kAlignment, "feature width does not match the probe");
  Predictions p;
  p.probabilities = nn::softmax_rows(net_.head.forward(features));
  p.labels.resize(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    Eigen::Index arg = 0;
    p.probabilities.row(r).maxCoeff(&arg);
    p.labels[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return p;
}

Predictions ProbeModel::predict(const std::vector<ProbeSequence>& data) const {
  if (spec_.kind == ProbeKind::kLinear) return predict(pool_examples(data, spec_.granularity));
  std::vector<MatrixXf> parts;
  Eigen::Index rows = 0;
  for (const auto& s : data) {
    check_labels(s, spec_.granularity);
    parts.push_back(nn::softmax_rows(conformer_logits(net_, s, spec_.granularity, nullptr)));
    rows += parts.back().rows();
  }
  Predictions p;
  p.probabilities.resize(rows, spec_.num_classes);
  Eigen::Index r = 0;
  for (const auto& m : parts) {
    p.probabilities.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::Index arg = 0;
    p.probabilities.row(i).maxCoeff(&arg);
    p.labels.push_back(static_cast<int>(arg));
  }
  return p;
}

ProbeModel train_probe(const MatrixXf& features, const std::vector<int>& labels, const ProbeSpec& spec,
                       const ProbeTrainConfig& cfg, std::uint64_t seed) {
  spec.validate();
  cfg.validate();
  if (spec.kind != ProbeKind::kLinear) throw Error(ErrorCode::kInvalidArgument, "pooled features need a linear probe");
  if (features.rows() != static_cast<Eigen::Index>(labels.size()) || features.rows() == 0) {
    throw Error(ErrorCode::kAlignment, "probe features and labels differ in length");
  }
  check_training_labels(labels, spec.num_classes);

  ProbeModel model;
  model.spec_ = spec;
  model.net_.head = nn::Linear<float>(static_cast<int>(features.cols()), spec.num_classes);
  nn::AdamW<float> opt(cfg.weight_decay);
  const nn::LinearSchedule sched{cfg.peak_lr, cfg.warmup_steps, cfg.steps};

  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;
  const auto batch = static_cast<std::size_t>(std::min<Eigen::Index>(cfg.batch_size, features.rows()));
  MatrixXf xb(static_cast<Eigen::Index>(batch), features.cols());
  std::vector<int> yb(batch);
  for (int step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      xb.row(static_cast<Eigen::Index>(b)) = features.row(static_cast<Eigen::Index>(i));
      yb[b] = labels[i];
    }
    zero_grads(model.net_);
    nn::Linear<float>::Cache c;
    const MatrixXf logits = model.net_.head.forward(xb, &c);
    model.net_.head.backward(cross_entropy_grad(logits, yb, nullptr), c);
    opt.step(model.net_, sched.at(step));
  }
  return model;
}

ProbeModel train_probe(const std::vector<ProbeSequence>& train, const ProbeSpec& spec, const ProbeTrainConfig& cfg,
                       std::uint64_t seed) {
  if (spec.kind == ProbeKind::kLinear) {
    std::vector<int> labels;
    const MatrixXf x = pool_examples(train, spec.granularity, &labels);
    ProbeSpec s = spec;
    return train_probe(x, labels, s, cfg, seed);
  }
  spec.validate();
  cfg.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "no probe sequences");
  std::vector<int> all;
  for (const auto& s : train) {
    if (s.frames.cols() != spec.input_dim) throw Error(ErrorCode::kAlignment, "feature width does not match the probe");
    check_labels(s, spec.granularity);
    all.insert(all.end(), s.labels.begin(), s.labels.end());
  }
  check_training_labels(all, spec.num_classes);

  ProbeModel model;
  model.spec_ = spec;
  std::mt19937_64 rng(seed);
  const nn::BlockShape shape{spec.conformer_dim, spec.conformer_heads, spec.conformer_feedforward_dim,
                             spec.conformer_kernel_size};
  model.net_.input = nn::Linear<float>(spec.input_dim, spec.conformer_dim);
  model.net_.input.init(rng);
  for (int b = 0; b < spec.conformer_blocks; ++b) {
    model.net_.blocks.emplace_back(shape);
    model.net_.blocks.back().init(rng);
  }
  model.net_.head = nn::Linear<float>(pooled_width(spec), spec.num_classes);
  model.net_.head.init(rng);

  nn::AdamW<float> opt(cfg.weight_decay);
  const nn::LinearSchedule sched{cfg.peak_lr, cfg.warmup_steps, cfg.steps};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = train.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train.size());
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> picked;
    long examples = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == train.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      picked.push_back(order[cursor++]);
      examples += static_cast<long>(train[picked.back()].labels.size());
    }
    zero_grads(model.net_);
    for (std::size_t i : picked) {
      const ProbeSequence& s = train[i];
      SequenceCache cache;
      const MatrixXf logits = conformer_logits(model.net_, s, spec.granularity, &cache);
      // Mean over every example in the batch, not per sequence.
      MatrixXf dlogits = cross_entropy_grad(logits, s.labels, nullptr) *
                         (static_cast<float>(logits.rows()) / static_cast<float>(examples));
      MatrixXf d = model.net_.head.backward(dlogits, cache.head);
      d = unpool_grad(d, cache.hidden, spec.granularity, s.spans);
      for (std::size_t b = model.net_.blocks.size(); b-- > 0;) d = model.net_.blocks[b].backward(d, cache.blocks[b]);
      model.net_.input.backward(d, cache.input);
    }
    opt.step(model.net_, sched.at(step));
  }
  return model;
}

}  // namespace mpm
