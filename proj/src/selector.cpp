#include "s3tta/selector.hpp"

#include <cmath>
#include <stdexcept>

namespace s3tta {

double pairwise_mae(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("pairwise_mae: image dims mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) s += std::abs(static_cast<double>(a.px[i]) - b.px[i]);
    return s / static_cast<double>(a.px.size());
}

ConsistencyScore consistency_score(const AugmentedBundle& bundle) {
    const std::size_t n = bundle.variants.size();
    if (n < 2) throw std::invalid_argument("consistency_score: need at least two variants");
    std::vector<Image> back;
    back.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        back.push_back(rotate_back(bundle.variants[i], bundle.angles[i]));

    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            total += pairwise_mae(back[i], back[j]);
            ++pairs;
        }
    return {bundle.policy, total / static_cast<double>(pairs)};
}

std::size_t select_index(const std::vector<ConsistencyScore>& scores) {
    if (scores.empty()) throw std::invalid_argument("select: empty score list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i].mae < scores[best].mae) best = i;
    return best;
}

std::pair<AugmentationPolicy, std::vector<ConsistencyScore>> select(
    const std::vector<AugmentedBundle>& bundles) {
    if (bundles.empty()) throw std::invalid_argument("select: empty bundle list");
    std::vector<ConsistencyScore> scores;
    scores.reserve(bundles.size());
    for (const auto& b : bundles) scores.push_back(consistency_score(b));
    return {scores[select_index(scores)].policy, std::move(scores)};
}

}  // namespace s3tta
