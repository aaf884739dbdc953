#pragma once

#include <cstdint>
#include <vector>

#include "mpm/types.hpp"

namespace mpm {

/// Mean over utterances of |actual - predicted| / actual. Utterances with
/// actual == 0 are excluded with a warning.
double ser(const std::vector<int>& actual, const std::vector<int>& predicted);

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b);

/// F1 of the positive class. With no positive gold and no positive
/// prediction the score is defined as 0 and a warning is issued.
double f1_binary(const std::vector<int>& preds, const std::vector<int>& golds);

struct Accuracy {
  double weighted = 0.0;    // overall fraction correct
  double unweighted = 0.0;  // mean recall over classes present in gold
};

Accuracy weighted_unweighted_accuracy(const std::vector<int>& preds, const std::vector<int>& golds,
                                      int num_classes);

/// Fold index per item, sizes within one of each other.
std::vector<int> kfold_split(int num_items, int k, std::uint64_t seed);

/// Maximal runs of frames with probability above threshold; runs separated
/// by fewer than min_gap_frames sub-threshold frames are merged.
int count_syllables_from_frames(const std::vector<double>& probabilities, double threshold = 0.5,
                                int min_gap_frames = 3);

}  // namespace mpm
