#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s3tta/segnet.hpp"

namespace s3tta {

struct MatchResult {
    int tp = 0, fp = 0, fn = 0;
    double iou_threshold = 0.5;
};

/// Entry (i, j) = IoU of predicted instance i+1 and ground-truth instance j+1.
std::vector<std::vector<double>> iou_matrix(const LabelMap& pred, const LabelMap& gt);

/// One-to-one matching maximizing the number of pairs with IoU >= tau
/// (maximum-cardinality bipartite matching).
MatchResult match_instances(const LabelMap& pred, const LabelMap& gt, double tau);

/// F1 = 2tp / (2tp + fp + fn); defined as 1.0 when both maps are empty.
double f1_at(const LabelMap& pred, const LabelMap& gt, double tau);

/// Foreground-overlap scores on the nonzero supports; (1, 1) when both empty.
std::pair<double, double> dice_jaccard(const LabelMap& pred_fg, const LabelMap& gt_fg);

/// The rejected aggregate-everything strategy, kept as the comparison
/// baseline: segment every variant of every policy, rotate and resize all
/// probability maps back, average, decode.
LabelMap baseline_aggregate_all(const UNetF& net, const std::vector<AugmentedBundle>& bundles,
                                int orig_h, int orig_w, int min_area = 9);

LabelMap baseline_aggregate_all(const UNetF& net, const StyleTransferF& st, const StyleBank& bank,
                                const Image& img, const S3ttaConfig& cfg);

/// Global-average-pooled deepest encoder features projected to 2D by a
/// principal-component projection fit on the full input list. Requires >= 3
/// images.
std::vector<std::pair<double, double>> embed_project(const std::vector<Image>& images,
                                                     const StyleTransferF& st);

double mean_pairwise_distance(const std::vector<std::pair<double, double>>& pts);

// ---- report writing -----------------------------------------------------------

struct MetricsRow {
    std::string image_id;
    std::string method;
    double tau = 0.5;
    double f1 = 0.0;       // fractions in [0,1]; written as percentages
    double dice = 0.0;
    double jaccard = 0.0;
};

/// Per-image rows plus one aggregate "mean" row per (method, tau), formatted
/// as percentages with one decimal.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace s3tta
