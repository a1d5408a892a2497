#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s3tta/augment.hpp"
#include "s3tta/image.hpp"
#include "s3tta/nn.hpp"
#include "s3tta/selector.hpp"

namespace s3tta {

/// Pixel classes of the segmentation head.
enum SegClass : std::uint8_t { kBackground = 0, kInterior = 1, kBoundary = 2 };
constexpr int kNumClasses = 3;

/// H x W x 3 per-pixel class probabilities (sum to 1 per pixel).
struct ProbMap {
    int h = 0, w = 0;
    std::vector<float> p;

    ProbMap() = default;
    ProbMap(int h_, int w_) : h(h_), w(w_), p(static_cast<std::size_t>(h_) * w_ * kNumClasses, 0.0f) {}

    float& at(int y, int x, int k) { return p[(static_cast<std::size_t>(y) * w + x) * kNumClasses + k]; }
    float at(int y, int x, int k) const {
        return p[(static_cast<std::size_t>(y) * w + x) * kNumClasses + k];
    }

    void renormalize();
};

ProbMap rotate_probmap(const ProbMap& pm, RotationAngle k);
inline ProbMap rotate_probmap_back(const ProbMap& pm, RotationAngle k) {
    return rotate_probmap(pm, k.inverse());
}
/// Bilinear resize followed by per-pixel renormalization.
ProbMap resize_probmap(const ProbMap& pm, int oh, int ow);

// ---- U-shaped segmentation network ------------------------------------------

/// Three down/up levels with skip connections and a 3-class head. Widths are
/// (base, 2*base, 4*base); spatial stride is 8.
template <typename T>
struct UNet {
    int in_ch = 0, base = 16;
    Conv2d<T> enc0, enc1, enc2, bott, dec2, dec1, dec0, head;

    struct Cache {
        ConvCache<T> c_enc0, c_enc1, c_enc2, c_bott, c_dec2, c_dec1, c_dec0, c_head;
        TensorT<T> e0, e1, e2, bb, d2, d1, d0;  // relu outputs
    };

    UNet() = default;
    UNet(int in, int base_)
        : in_ch(in),
          base(base_),
          enc0(in, base_),
          enc1(base_, 2 * base_),
          enc2(2 * base_, 4 * base_),
          bott(4 * base_, 4 * base_),
          dec2(8 * base_, 2 * base_),
          dec1(4 * base_, base_),
          dec0(2 * base_, base_),
          head(base_, kNumClasses) {}

    void init(RandomGen& rng) {
        for (auto* cv : conv_list()) cv->init_he(rng);
    }

    static constexpr int size_multiple() { return 8; }

    TensorT<T> logits(const TensorT<T>& x) const {
        TensorT<T> e0 = relu(enc0.forward(x));
        TensorT<T> e1 = relu(enc1.forward(avgpool2(e0)));
        TensorT<T> e2 = relu(enc2.forward(avgpool2(e1)));
        TensorT<T> bb = relu(bott.forward(avgpool2(e2)));
        TensorT<T> d2 = relu(dec2.forward(concat_channels(upsample2_nearest(bb), e2)));
        TensorT<T> d1 = relu(dec1.forward(concat_channels(upsample2_nearest(d2), e1)));
        TensorT<T> d0 = relu(dec0.forward(concat_channels(upsample2_nearest(d1), e0)));
        return head.forward(d0);
    }

    TensorT<T> logits(const TensorT<T>& x, Cache& cc) const {
        cc.e0 = relu(enc0.forward(x, cc.c_enc0));
        cc.e1 = relu(enc1.forward(avgpool2(cc.e0), cc.c_enc1));
        cc.e2 = relu(enc2.forward(avgpool2(cc.e1), cc.c_enc2));
        cc.bb = relu(bott.forward(avgpool2(cc.e2), cc.c_bott));
        cc.d2 = relu(dec2.forward(concat_channels(upsample2_nearest(cc.bb), cc.e2), cc.c_dec2));
        cc.d1 = relu(dec1.forward(concat_channels(upsample2_nearest(cc.d2), cc.e1), cc.c_dec1));
        cc.d0 = relu(dec0.forward(concat_channels(upsample2_nearest(cc.d1), cc.e0), cc.c_dec0));
        return head.forward(cc.d0, cc.c_head);
    }

    /// wgrads aligned with params() (16 tensors). Returns input gradient.
    TensorT<T> backward(const Cache& cc, const TensorT<T>& dlogits,
                        std::vector<TensorT<T>>& wg) const {
        TensorT<T> dd0 = relu_backward(head.backward(cc.c_head, dlogits, wg[14], wg[15]), cc.d0);
        TensorT<T> du0, de0_skip;
        split_channels_grad(dec0.backward(cc.c_dec0, dd0, wg[12], wg[13]), base, du0, de0_skip);

        TensorT<T> dd1 = relu_backward(upsample2_nearest_backward(du0), cc.d1);
        TensorT<T> du1, de1_skip;
        split_channels_grad(dec1.backward(cc.c_dec1, dd1, wg[10], wg[11]), 2 * base, du1, de1_skip);

        TensorT<T> dd2 = relu_backward(upsample2_nearest_backward(du1), cc.d2);
        TensorT<T> du2, de2_skip;
        split_channels_grad(dec2.backward(cc.c_dec2, dd2, wg[8], wg[9]), 4 * base, du2, de2_skip);

        TensorT<T> dbb = relu_backward(upsample2_nearest_backward(du2), cc.bb);
        TensorT<T> de2 = avgpool2_backward(bott.backward(cc.c_bott, dbb, wg[6], wg[7]));
        de2 += de2_skip;

        TensorT<T> de1 = avgpool2_backward(
            enc2.backward(cc.c_enc2, relu_backward(de2, cc.e2), wg[4], wg[5]));
        de1 += de1_skip;

        TensorT<T> de0 = avgpool2_backward(
            enc1.backward(cc.c_enc1, relu_backward(de1, cc.e1), wg[2], wg[3]));
        de0 += de0_skip;

        return enc0.backward(cc.c_enc0, relu_backward(de0, cc.e0), wg[0], wg[1]);
    }

    std::vector<Conv2d<T>*> conv_list() {
        return {&enc0, &enc1, &enc2, &bott, &dec2, &dec1, &dec0, &head};
    }
    std::vector<const Conv2d<T>*> conv_list() const {
        return {&enc0, &enc1, &enc2, &bott, &dec2, &dec1, &dec0, &head};
    }

    std::vector<TensorT<T>*> params() {
        std::vector<TensorT<T>*> p;
        for (auto* cv : conv_list()) {
            p.push_back(&cv->w);
            p.push_back(&cv->b);
        }
        return p;
    }
    std::vector<const TensorT<T>*> params() const {
        std::vector<const TensorT<T>*> p;
        for (const auto* cv : conv_list()) {
            p.push_back(&cv->w);
            p.push_back(&cv->b);
        }
        return p;
    }

    std::uint64_t hash() const { return hash_params(params()); }
};

using UNetF = UNet<float>;

// ---- probabilities and loss --------------------------------------------------

/// Softmax over the class axis of [3,H,W] logits.
ProbMap softmax_probmap(const Tensor& logits);

/// Reflect-pads to the network stride, runs the net, unpads. Rejects images
/// smaller than the stride.
ProbMap seg_forward(const UNetF& net, const Image& img);

/// 3-class training target: instance pixels whose 8-neighborhood leaves the
/// instance become boundary, remaining instance pixels interior. Out-of-image
/// neighbors count as background.
std::vector<std::uint8_t> labels_to_target3(const LabelMap& labels);

/// Mean per-pixel cross-entropy of the probabilities against the 3-class
/// target derived from the instance labels.
double seg_loss(const ProbMap& pred, const LabelMap& labels);

/// Marks pixels excluded from the loss (reflect-padded borders at train time).
constexpr std::uint8_t kIgnoreClass = 255;

/// Fused softmax + cross-entropy on logits, mean over non-ignored pixels;
/// dlogits = (softmax - onehot) / n_valid.
template <typename T>
double softmax_ce_grad(const TensorT<T>& logits, const std::vector<std::uint8_t>& target,
                       TensorT<T>& dlogits) {
    const int h = logits.dim(1), w = logits.dim(2);
    const std::size_t npix = static_cast<std::size_t>(h) * w;
    if (target.size() != npix) throw std::invalid_argument("softmax_ce: target size mismatch");
    std::size_t valid = 0;
    for (std::size_t i = 0; i < npix; ++i) valid += target[i] != kIgnoreClass;
    if (valid == 0) throw std::invalid_argument("softmax_ce: no valid pixels");
    const std::size_t hw = npix;
    double loss = 0.0;
    for (std::size_t i = 0; i < npix; ++i) {
        if (target[i] == kIgnoreClass) continue;
        double l[kNumClasses], mx = -1e300;
        for (int k = 0; k < kNumClasses; ++k) {
            l[k] = logits.data[k * hw + i];
            mx = std::max(mx, l[k]);
        }
        double z = 0.0;
        for (int k = 0; k < kNumClasses; ++k) z += std::exp(l[k] - mx);
        const int t = target[i];
        loss += -(l[t] - mx - std::log(z));
        for (int k = 0; k < kNumClasses; ++k) {
            const double p = std::exp(l[k] - mx) / z;
            dlogits.data[k * hw + i] +=
                static_cast<T>((p - (k == t ? 1.0 : 0.0)) / static_cast<double>(valid));
        }
    }
    return loss / static_cast<double>(valid);
}

// ---- instance decoding ---------------------------------------------------------

/// Interior-threshold 0.5, 4-connected labeling, boundary pixels absorbed into
/// the nearest component (multi-source BFS), then min_area filtering and
/// contiguous relabeling.
LabelMap decode_instances(const ProbMap& pred, int min_area = 9);

// ---- prediction pipelines -------------------------------------------------------

LabelMap predict_plain(const UNetF& net, const Image& img, int min_area = 9);

struct S3ttaConfig {
    std::vector<double> scales{0.7, 1.0, 1.5, 2.0};
    std::vector<RotationAngle> angles{RotationAngle(0), RotationAngle(1), RotationAngle(2),
                                      RotationAngle(3)};
    bool include_identity = true;
    int min_area = 9;
};

struct S3ttaPrediction {
    LabelMap labels;
    AugmentationPolicy winner;
    std::vector<ConsistencyScore> scores;
};

/// Full pipeline: build bundles for every policy, select the most
/// rotation-consistent one, segment its variants, rotate the probability maps
/// back, average, resize to the input size, renormalize, decode.
S3ttaPrediction predict_s3tta(const UNetF& net, const StyleTransferF& st, const StyleBank& bank,
                              const Image& img, const S3ttaConfig& cfg);

/// As predict_s3tta but with pre-built bundles (shared with callers that also
/// need them, e.g. the aggregate-all baseline).
S3ttaPrediction predict_s3tta_from_bundles(const UNetF& net, const std::vector<AugmentedBundle>& bundles,
                                           int orig_h, int orig_w, int min_area);

// ---- checkpoints -------------------------------------------------------------------

void save_seg_checkpoint(const std::string& path, const UNetF& net);
UNetF load_seg_checkpoint(const std::string& path);

}  // namespace s3tta
