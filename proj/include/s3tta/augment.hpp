#pragma once

#include <functional>
#include <string>
#include <vector>

#include "s3tta/image.hpp"
#include "s3tta/styletx.hpp"

namespace s3tta {

/// One scale-style combination. style_index -1 is the identity-style policy
/// (no style transfer applied).
struct AugmentationPolicy {
    double scale = 1.0;
    int style_index = -1;

    bool operator==(const AugmentationPolicy& o) const {
        return scale == o.scale && style_index == o.style_index;
    }
};

struct StyleBank {
    std::vector<std::string> ids;
    std::vector<Image> images;

    int size() const { return static_cast<int>(images.size()); }
};

/// Directory of image files plus manifest.csv listing identifiers in order.
void save_style_bank(const std::string& dir, const StyleBank& bank);
StyleBank load_style_bank(const std::string& dir);

/// Cartesian product of scales and style choices: scale ascending, then style
/// index ascending with -1 (when enabled) first.
std::vector<AugmentationPolicy> enumerate_policies(std::vector<double> scales, int bank_size,
                                                   bool include_identity);

/// Stylized variants of one image under one policy, one per rotation angle.
/// variants[i] corresponds to angles[i] and is stored in rotated orientation.
struct AugmentedBundle {
    AugmentationPolicy policy;
    std::vector<RotationAngle> angles;
    std::vector<Image> variants;
    int orig_h = 0, orig_w = 0;
};

/// Injection point for the augmentation ops; tests substitute recorders or
/// stubs, production code uses make_default_ops.
struct AugmentOps {
    std::function<Image(const Image&, RotationAngle)> rotate_fn;
    std::function<Image(const Image&, double)> resize_fn;
    std::function<Image(const Image&, int)> stylize_fn;  // called only for style_index >= 0
};

/// Default ops bound to a style-transfer network and bank. The bank's deepest
/// features are encoded once up front.
AugmentOps make_default_ops(const StyleTransferF& st, const StyleBank& bank);

/// Ordered augmentation: rotate, then resize, then style transfer.
AugmentedBundle apply_policy(const Image& img, const AugmentationPolicy& policy,
                             const std::vector<RotationAngle>& angles, const AugmentOps& ops);

AugmentedBundle apply_policy(const Image& img, const AugmentationPolicy& policy,
                             const std::vector<RotationAngle>& angles, const StyleTransferF& st,
                             const StyleBank& bank);

enum class StyleSelection { kFarthestPoint, kRandom };

/// Picks n style images from a pool. Farthest-point sampling operates in the
/// encoder's deepest feature-stat space; the random fallback draws without
/// replacement from a seeded stream.
StyleBank build_style_bank(const std::vector<Image>& pool, const std::vector<std::string>& ids,
                           const StyleTransferF& st, int n, StyleSelection method,
                           std::uint64_t seed);

}  // namespace s3tta
