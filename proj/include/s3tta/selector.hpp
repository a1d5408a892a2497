#pragma once

#include <utility>
#include <vector>

#include "s3tta/augment.hpp"

namespace s3tta {

struct ConsistencyScore {
    AugmentationPolicy policy;
    double mae = 0.0;
};

/// Per-pixel-per-channel mean absolute error between same-sized images.
double pairwise_mae(const Image& a, const Image& b);

/// Rotates every variant back to the original orientation and averages the
/// pairwise MAE over all unordered variant pairs. Requires >= 2 variants.
ConsistencyScore consistency_score(const AugmentedBundle& bundle);

/// Argmin of mae; ties broken by position in the input list (enumeration
/// order). Returns the winner plus all scores for logging.
std::pair<AugmentationPolicy, std::vector<ConsistencyScore>> select(
    const std::vector<AugmentedBundle>& bundles);

std::size_t select_index(const std::vector<ConsistencyScore>& scores);

}  // namespace s3tta
