#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s3tta/augment.hpp"
#include "s3tta/segnet.hpp"
#include "s3tta/styletx.hpp"
#include "s3tta/synthdata.hpp"

namespace s3tta {

struct LossWeights {
    double w_c = 1.0, w_s = 2.0, w_seg = 5.0;
};

/// Weighted sum: L_seg*w_seg + (L_c*w_c + L_s*w_s).
inline double total_loss(double l_seg, double l_c, double l_s, const LossWeights& w) {
    return l_seg * w.w_seg + (l_c * w.w_c + l_s * w.w_s);
}

struct TrainConfig {
    std::uint64_t seed = 42;
    double lr_pretrain = 1e-3;
    double lr_joint = 5e-4;
    /// Encoder learning-rate multiplier during pretraining. The objective is
    /// measured in the encoder's own feature space, so an unconstrained
    /// encoder can shrink its features instead of solving the task; a slower
    /// encoder keeps the feature space informative while the decoder learns
    /// to invert it.
    double encoder_lr_scale = 0.1;
    int batch_size = 4;
    int pretrain_steps = 500;
    int joint_steps = 2000;
    std::vector<double> scales{0.7, 1.0, 1.5, 2.0};
    bool include_identity = true;
    std::vector<RotationAngle> angles{RotationAngle(0), RotationAngle(1), RotationAngle(2),
                                      RotationAngle(3)};
    LossWeights weights;
    int min_area = 9;
};

struct PretrainStep {
    int step = 0;
    double l_c = 0.0, l_s = 0.0, weighted = 0.0;
};
struct PretrainResult {
    std::vector<PretrainStep> history;
};

/// Phase 1: optimize w_c*L_c + w_s*L_s on randomly paired (content, style)
/// samples; encoder and decoder both train. Aborts on non-finite loss.
PretrainResult pretrain_style(const std::vector<Sample>& data, const TrainConfig& cfg,
                              StyleTransferF& st);

struct JointStep {
    int step = 0;
    double l_seg = 0.0, l_c = 0.0, l_s = 0.0, l_total = 0.0;
    double selected_scale = 1.0;
    int selected_style = -1;
};
struct JointResult {
    std::vector<JointStep> history;
    std::uint64_t encoder_hash_before = 0, encoder_hash_after = 0;
    long grad_variant_count = 0;  // training forwards that contributed gradient
};

/// Phase 2: per step, build bundles over all policies for one sample, select
/// the winner by rotational consistency, and optimize decoder + segmentation
/// network on the winner's unrotated variant. The encoder stays frozen.
JointResult joint_train(const std::vector<Sample>& data, const StyleBank& bank,
                        const TrainConfig& cfg, StyleTransferF& st, UNetF& seg);

void write_pretrain_log(const std::string& path, const PretrainResult& r);
void write_joint_log(const std::string& path, const JointResult& r);

}  // namespace s3tta
