#include "s3tta/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace s3tta {

std::int32_t LabelMap::max_label() const {
    std::int32_t m = 0;
    for (auto x : v) m = std::max(m, x);
    return m;
}

RotationAngle::RotationAngle(int k) : quarter_turns(k) {
    if (k < 0 || k > 3) throw std::invalid_argument("rotation angle: quarter_turns must be in 0..3");
}

bool image_valid(const Image& img) {
    if (img.h <= 0 || img.w <= 0) return false;
    if (img.c != 1 && img.c != 3) return false;
    if (img.px.size() != static_cast<std::size_t>(img.h) * img.w * img.c) return false;
    for (float v : img.px) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return false;
    }
    return true;
}

void raster_rotate(const float* src, int h, int w, int c, int k, float* dst) {
    // k = 1 maps src(r, col) -> dst(col, h-1-r)
    const std::size_t n = static_cast<std::size_t>(h) * w * c;
    auto idx = [c](int rows, int cols, int r, int col) {
        (void)rows;
        return (static_cast<std::size_t>(r) * cols + col) * c;
    };
    switch (k & 3) {
        case 0:
            std::copy(src, src + n, dst);
            break;
        case 1:
            for (int r = 0; r < h; ++r)
                for (int col = 0; col < w; ++col) {
                    const float* s = src + idx(h, w, r, col);
                    float* d = dst + idx(w, h, col, h - 1 - r);
                    for (int ch = 0; ch < c; ++ch) d[ch] = s[ch];
                }
            break;
        case 2:
            for (int r = 0; r < h; ++r)
                for (int col = 0; col < w; ++col) {
                    const float* s = src + idx(h, w, r, col);
                    float* d = dst + idx(h, w, h - 1 - r, w - 1 - col);
                    for (int ch = 0; ch < c; ++ch) d[ch] = s[ch];
                }
            break;
        case 3:
            for (int r = 0; r < h; ++r)
                for (int col = 0; col < w; ++col) {
                    const float* s = src + idx(h, w, r, col);
                    float* d = dst + idx(w, h, w - 1 - col, r);
                    for (int ch = 0; ch < c; ++ch) d[ch] = s[ch];
                }
            break;
    }
}

void raster_resize_bilinear(const float* src, int h, int w, int c, int oh, int ow, float* dst,
                            bool clamp01) {
    const double fy = static_cast<double>(h) / oh;
    const double fx = static_cast<double>(w) / ow;
    auto clampi = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    for (int oy = 0; oy < oh; ++oy) {
        const double sy = (oy + 0.5) * fy - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double ty = sy - y0;
        const int y0c = clampi(y0, h), y1c = clampi(y0 + 1, h);
        const double wy0 = 1.0 - ty, wy1 = ty;
        for (int ox = 0; ox < ow; ++ox) {
            const double sx = (ox + 0.5) * fx - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double tx = sx - x0;
            const int x0c = clampi(x0, w), x1c = clampi(x0 + 1, w);
            const double wx0 = 1.0 - tx, wx1 = tx;
            const float* r0 = src + (static_cast<std::size_t>(y0c) * w) * c;
            const float* r1 = src + (static_cast<std::size_t>(y1c) * w) * c;
            float* d = dst + (static_cast<std::size_t>(oy) * ow + ox) * c;
            for (int ch = 0; ch < c; ++ch) {
                const double t00 = (wy0 * wx0) * r0[x0c * c + ch];
                const double t01 = (wy0 * wx1) * r0[x1c * c + ch];
                const double t10 = (wy1 * wx0) * r1[x0c * c + ch];
                const double t11 = (wy1 * wx1) * r1[x1c * c + ch];
                // pairing (t00+t11)+(t01+t10) is invariant under transpose and
                // axis flips, which makes rotation/resize commute bit-exactly
                double v = (t00 + t11) + (t01 + t10);
                if (clamp01) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                d[ch] = static_cast<float>(v);
            }
        }
    }
}

Image rotate(const Image& img, RotationAngle k) {
    Image out;
    out.c = img.c;
    if (k.quarter_turns % 2 == 0) {
        out.h = img.h;
        out.w = img.w;
    } else {
        out.h = img.w;
        out.w = img.h;
    }
    out.px.resize(img.px.size());
    raster_rotate(img.px.data(), img.h, img.w, img.c, k.quarter_turns, out.px.data());
    return out;
}

static int rounded_dim(int n, double ratio) {
    return static_cast<int>(std::llround(static_cast<double>(n) * ratio));
}

Image resize(const Image& img, double ratio) {
    if (!(ratio > 0.0)) throw std::invalid_argument("resize: ratio must be positive");
    const int oh = rounded_dim(img.h, ratio);
    const int ow = rounded_dim(img.w, ratio);
    if (oh < 1 || ow < 1) throw std::invalid_argument("resize: ratio produces zero-size output");
    return resize_to(img, oh, ow);
}

Image resize_to(const Image& img, int oh, int ow) {
    if (oh < 1 || ow < 1) throw std::invalid_argument("resize_to: target dims must be positive");
    Image out(oh, ow, img.c);
    raster_resize_bilinear(img.px.data(), img.h, img.w, img.c, oh, ow, out.px.data(), true);
    return out;
}

LabelMap resize_nearest(const LabelMap& labels, int oh, int ow) {
    if (oh < 1 || ow < 1) throw std::invalid_argument("resize_nearest: target dims must be positive");
    LabelMap out(oh, ow);
    const double fy = static_cast<double>(labels.h) / oh;
    const double fx = static_cast<double>(labels.w) / ow;
    for (int oy = 0; oy < oh; ++oy) {
        int sy = static_cast<int>(std::lround((oy + 0.5) * fy - 0.5));
        sy = std::clamp(sy, 0, labels.h - 1);
        for (int ox = 0; ox < ow; ++ox) {
            int sx = static_cast<int>(std::lround((ox + 0.5) * fx - 0.5));
            sx = std::clamp(sx, 0, labels.w - 1);
            out.at(oy, ox) = labels.at(sy, sx);
        }
    }
    return out;
}

static int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

Image pad_reflect_to_multiple(const Image& img, int multiple, PadInfo& pad) {
    const int th = (img.h + multiple - 1) / multiple * multiple;
    const int tw = (img.w + multiple - 1) / multiple * multiple;
    pad.top = (th - img.h) / 2;
    pad.bottom = th - img.h - pad.top;
    pad.left = (tw - img.w) / 2;
    pad.right = tw - img.w - pad.left;
    if (!pad.any()) return img;
    if (pad.top + pad.bottom >= img.h || pad.left + pad.right >= img.w)
        throw std::invalid_argument("pad_reflect: image too small for requested multiple");
    Image out(th, tw, img.c);
    for (int y = 0; y < th; ++y) {
        const int sy = reflect101(y - pad.top, img.h);
        for (int x = 0; x < tw; ++x) {
            const int sx = reflect101(x - pad.left, img.w);
            for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(sy, sx, ch);
        }
    }
    return out;
}

Image unpad(const Image& img, const PadInfo& pad) {
    if (!pad.any()) return img;
    const int oh = img.h - pad.top - pad.bottom;
    const int ow = img.w - pad.left - pad.right;
    Image out(oh, ow, img.c);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(y + pad.top, x + pad.left, ch);
    return out;
}

Tensor image_to_chw(const Image& img) {
    Tensor t({img.c, img.h, img.w});
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) t.at(ch, y, x) = img.at(y, x, ch);
    return t;
}

Image chw_to_image(const Tensor& t, bool clamp01) {
    Image img(t.dim(1), t.dim(2), t.dim(0));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float v = t.at(ch, y, x);
                if (clamp01) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                img.at(y, x, ch) = v;
            }
    return img;
}

int relabel_contiguous(LabelMap& labels) {
    std::unordered_map<std::int32_t, std::int32_t> remap;
    std::int32_t next = 1;
    for (auto& x : labels.v) {
        if (x == 0) continue;
        auto it = remap.find(x);
        if (it == remap.end()) it = remap.emplace(x, next++).first;
        x = it->second;
    }
    return next - 1;
}

}  // namespace s3tta
