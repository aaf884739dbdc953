#include "mpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mpm/error.hpp"
#include "mpm/log.hpp"

namespace mpm {

double ser(const std::vector<int>& actual, const std::vector<int>& predicted) {
  if (actual.size() != predicted.size()) throw Error(ErrorCode::kAlignment, "ser: length mismatch");
  double sum = 0.0;
  int used = 0, excluded = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] <= 0) {
      ++excluded;
      continue;
    }
    sum += std::abs(static_cast<double>(actual[i] - predicted[i])) / actual[i];
    ++used;
  }
  if (excluded > 0) warn("ser: " + std::to_string(excluded) + " utterance(s) with zero syllables excluded");
  if (used == 0) throw Error(ErrorCode::kEmptyInput, "ser: no utterance with a positive syllable count");
  return sum / used;
}

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kAlignment, "pearson: length mismatch");
  if (a.size() < 2) throw Error(ErrorCode::kTooFewItems, "pearson needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::kUndefinedCorrelation, "pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double f1_binary(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.size() != golds.size()) throw Error(ErrorCode::kAlignment, "f1: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0, g = golds[i] != 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  if (tp + fp + fn == 0) {
    warn("f1: no positive labels or predictions, score defined as 0");
    return 0.0;
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

Accuracy weighted_unweighted_accuracy(const std::vector<int>& preds, const std::vector<int>& golds,
                                      int num_classes) {
  if (preds.size() != golds.size()) throw Error(ErrorCode::kAlignment, "accuracy: length mismatch");
  if (golds.empty()) throw Error(ErrorCode::kEmptyInput, "accuracy of an empty set");
  std::vector<long> hits(static_cast<std::size_t>(num_classes), 0), totals(static_cast<std::size_t>(num_classes), 0);
  long correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const int g = golds[i], p = preds[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "accuracy: label outside [0, num_classes)");
    }
    ++totals[static_cast<std::size_t>(g)];
    if (p == g) {
      ++hits[static_cast<std::size_t>(g)];
      ++correct;
    }
  }
  Accuracy acc;
  acc.weighted = static_cast<double>(correct) / static_cast<double>(golds.size());
  int present = 0;
  for (std::size_t c = 0; c < totals.size(); ++c) {
    if (totals[c] == 0) continue;
    acc.unweighted += static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
    ++present;
  }
  acc.unweighted /= present;
  return acc;
}

std::vector<int> kfold_split(int num_items, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "kfold needs k >= 2");
  if (num_items < k) {
    throw Error(ErrorCode::kTooFewItems,
                "kfold: " + std::to_string(num_items) + " items for " + std::to_string(k) + " folds");
  }
  std::vector<int> order(static_cast<std::size_t>(num_items));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's shuffle.
  for (int i = num_items - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(num_items));
  for (int r = 0; r < num_items; ++r) fold[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r % k;
  return fold;
}

int count_syllables_from_frames(const std::vector<double>& probabilities, double threshold, int min_gap_frames) {
  int count = 0;
  int gap = 0;
  bool seen = false;
  for (double p : probabilities) {
    if (p > threshold) {
      if (!seen || gap >= min_gap_frames) ++count;
      seen = true;
      gap = 0;
    } else {
      ++gap;
    }
  }
  return count;
}

}  // namespace mpm
