#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s3tta/tensor.hpp"

namespace s3tta {

/// H x W x C raster of values in [0, 1], row-major, channel-interleaved.
struct Image {
    int h = 0, w = 0, c = 1;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), px(static_cast<std::size_t>(h_) * w_ * c_, 0.0f) {}

    float& at(int y, int x, int ch) { return px[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return px[(static_cast<std::size_t>(y) * w + x) * c + ch]; }

    bool same_dims(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

/// Instance label raster: 0 = background, k > 0 = instance k.
struct LabelMap {
    int h = 0, w = 0;
    std::vector<std::int32_t> v;

    LabelMap() = default;
    LabelMap(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

    std::int32_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    std::int32_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }

    std::int32_t max_label() const;
};

/// Multiple of 90 degrees, counterclockwise in raster coordinates.
struct RotationAngle {
    int quarter_turns = 0;  // 0..3

    RotationAngle() = default;
    explicit RotationAngle(int k);

    RotationAngle inverse() const { return RotationAngle((4 - quarter_turns) % 4); }
    bool operator==(const RotationAngle& o) const { return quarter_turns == o.quarter_turns; }
};

// ---- raster primitives shared by Image / ProbMap -------------------------

/// Right-angle rotation as a pure index permutation. dst must hold h*w*c values;
/// for odd k the output raster is w x h.
void raster_rotate(const float* src, int h, int w, int c, int k, float* dst);

/// Bilinear resample with half-pixel centers and edge clamping. The 4-term
/// accumulation order is invariant under the raster's dihedral symmetries, so
/// right-angle rotation commutes with resampling bit-exactly whenever the
/// per-axis scale factors are exact in double (e.g. ratio 2 on square inputs).
void raster_resize_bilinear(const float* src, int h, int w, int c, int oh, int ow, float* dst,
                            bool clamp01);

// ---- Image operations ----------------------------------------------------

bool image_valid(const Image& img);  // finite, in [0,1], c in {1,3}

Image rotate(const Image& img, RotationAngle k);
inline Image rotate_back(const Image& img, RotationAngle k) { return rotate(img, k.inverse()); }

/// Output dims are round(h*ratio) x round(w*ratio); throws if either is < 1.
Image resize(const Image& img, double ratio);

/// Resize to explicit target dims (inverse mapping for prediction rasters).
Image resize_to(const Image& img, int oh, int ow);

/// Nearest-neighbor resize for label rasters (labels must not be blended).
LabelMap resize_nearest(const LabelMap& labels, int oh, int ow);

struct PadInfo {
    int top = 0, bottom = 0, left = 0, right = 0;
    bool any() const { return top || bottom || left || right; }
};

/// Symmetric reflect-101 padding so both dims become multiples of `multiple`.
/// Requires pad < dim on each axis.
Image pad_reflect_to_multiple(const Image& img, int multiple, PadInfo& pad);
Image unpad(const Image& img, const PadInfo& pad);

inline void clamp01_inplace(Image& img) {
    for (auto& v : img.px) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

// Image <-> [C,H,W] tensor conversion (network boundary).
Tensor image_to_chw(const Image& img);
Image chw_to_image(const Tensor& t, bool clamp01 = true);

/// Relabels nonzero ids to a contiguous 1..K range preserving first-appearance
/// order in raster scan. Returns K.
int relabel_contiguous(LabelMap& labels);

}  // namespace s3tta
