#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "s3tta/image.hpp"
#include "s3tta/nn.hpp"

namespace s3tta {

/// Epsilon added under the square root when computing channel sigma.
constexpr double kStatsEps = 1e-5;

template <typename T>
struct ChannelStats {
    TensorT<T> mu;     // [C]
    TensorT<T> sigma;  // [C], sqrt(var + eps)
};

template <typename T>
ChannelStats<T> channel_stats(const TensorT<T>& x) {
    const int c = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
    ChannelStats<T> s{TensorT<T>({c}), TensorT<T>({c})};
    for (int ci = 0; ci < c; ++ci) {
        const T* p = x.data.data() + ci * hw;
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
        }
        const double mean = sum / static_cast<double>(hw);
        double var = sq / static_cast<double>(hw) - mean * mean;
        if (var < 0.0) var = 0.0;  // numerical floor
        s.mu.data[ci] = static_cast<T>(mean);
        s.sigma.data[ci] = static_cast<T>(std::sqrt(var + kStatsEps));
    }
    return s;
}

/// Adds the stats-gradient contribution to dx.
template <typename T>
void channel_stats_backward(const TensorT<T>& x, const ChannelStats<T>& st, const TensorT<T>& dmu,
                            const TensorT<T>& dsigma, TensorT<T>& dx) {
    const int c = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
    for (int ci = 0; ci < c; ++ci) {
        const T* p = x.data.data() + ci * hw;
        T* d = dx.data.data() + ci * hw;
        const double n = static_cast<double>(hw);
        const double gmu = dmu.data[ci] / n;
        const double gsig = dsigma.data[ci] / (n * st.sigma.data[ci]);
        const double mu = st.mu.data[ci];
        for (std::size_t i = 0; i < hw; ++i) d[i] += static_cast<T>(gmu + gsig * (p[i] - mu));
    }
}

// ---- AdaIN -----------------------------------------------------------------

template <typename T>
struct AdainResult {
    TensorT<T> out;
    ChannelStats<T> content_stats, style_stats;
};

/// Renormalizes each content channel to the style channel's mean/sigma.
/// Spatial sizes of content and style may differ; channel counts must match.
template <typename T>
AdainResult<T> adain(const TensorT<T>& content, const TensorT<T>& style) {
    if (content.dim(0) != style.dim(0)) throw std::invalid_argument("adain: channel count mismatch");
    AdainResult<T> r;
    r.content_stats = channel_stats(content);
    r.style_stats = channel_stats(style);
    r.out = TensorT<T>(content.shape);
    const int c = content.dim(0);
    const std::size_t hw = static_cast<std::size_t>(content.dim(1)) * content.dim(2);
    for (int ci = 0; ci < c; ++ci) {
        const T* p = content.data.data() + ci * hw;
        T* o = r.out.data.data() + ci * hw;
        const T mu_c = r.content_stats.mu.data[ci];
        const T scale = r.style_stats.sigma.data[ci] / r.content_stats.sigma.data[ci];
        const T mu_s = r.style_stats.mu.data[ci];
        for (std::size_t i = 0; i < hw; ++i) o[i] = scale * (p[i] - mu_c) + mu_s;
    }
    return r;
}

/// Gradients of adain w.r.t. both inputs (accumulated into dcontent/dstyle).
template <typename T>
void adain_backward(const TensorT<T>& content, const TensorT<T>& style, const AdainResult<T>& r,
                    const TensorT<T>& dy, TensorT<T>& dcontent, TensorT<T>& dstyle) {
    const int c = content.dim(0);
    const std::size_t hw = static_cast<std::size_t>(content.dim(1)) * content.dim(2);
    TensorT<T> dmu_s({c}), dsigma_s({c});
    for (int ci = 0; ci < c; ++ci) {
        const T* p = content.data.data() + ci * hw;
        const T* g = dy.data.data() + ci * hw;
        T* dc = dcontent.data.data() + ci * hw;
        const double mu_c = r.content_stats.mu.data[ci];
        const double sig_c = r.content_stats.sigma.data[ci];
        const double sig_s = r.style_stats.sigma.data[ci];
        const double n = static_cast<double>(hw);

        double gsum = 0.0, gdotxhat = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            gsum += g[i];
            gdotxhat += g[i] * ((p[i] - mu_c) / sig_c);
        }
        const double gmean = gsum / n;
        const double gx_mean = gdotxhat / n;
        const double k = sig_s / sig_c;
        for (std::size_t i = 0; i < hw; ++i) {
            const double xhat = (p[i] - mu_c) / sig_c;
            dc[i] += static_cast<T>(k * (g[i] - gmean - xhat * gx_mean));
        }
        dmu_s.data[ci] = static_cast<T>(gsum);
        dsigma_s.data[ci] = static_cast<T>(gdotxhat);
    }
    channel_stats_backward(style, r.style_stats, dmu_s, dsigma_s, dstyle);
}

// ---- losses ----------------------------------------------------------------

/// Mean squared difference over all elements.
template <typename T>
double mse(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

/// d(mse)/da accumulated into da (and the mirror into db when given).
template <typename T>
double mse_grad(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>* da, TensorT<T>* db) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    const double inv = 2.0 / static_cast<double>(a.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
        if (da) da->data[i] += static_cast<T>(inv * d);
        if (db) db->data[i] -= static_cast<T>(inv * d);
    }
    return s / static_cast<double>(a.numel());
}

/// Squared Euclidean distance between two channel-stat vectors:
/// sum_c (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2.
template <typename T>
double stats_distance(const ChannelStats<T>& a, const ChannelStats<T>& b) {
    if (a.mu.numel() != b.mu.numel()) throw std::invalid_argument("stats_distance: channel mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.mu.numel(); ++i) {
        const double dm = static_cast<double>(a.mu.data[i]) - b.mu.data[i];
        const double ds = static_cast<double>(a.sigma.data[i]) - b.sigma.data[i];
        s += dm * dm + ds * ds;
    }
    return s;
}

template <typename T>
double stats_distance_grad(const ChannelStats<T>& a, const ChannelStats<T>& b, TensorT<T>& dmu_a,
                           TensorT<T>& dsigma_a, TensorT<T>& dmu_b, TensorT<T>& dsigma_b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.mu.numel(); ++i) {
        const double dm = static_cast<double>(a.mu.data[i]) - b.mu.data[i];
        const double ds = static_cast<double>(a.sigma.data[i]) - b.sigma.data[i];
        s += dm * dm + ds * ds;
        dmu_a.data[i] += static_cast<T>(2.0 * dm);
        dmu_b.data[i] -= static_cast<T>(2.0 * dm);
        dsigma_a.data[i] += static_cast<T>(2.0 * ds);
        dsigma_b.data[i] -= static_cast<T>(2.0 * ds);
    }
    return s;
}

/// Layer-wise stats distance summed over feature lists (the style objective).
template <typename T>
double style_loss_from_features(const std::vector<TensorT<T>>& a, const std::vector<TensorT<T>>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("style loss: layer count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += stats_distance(channel_stats(a[i]), channel_stats(b[i]));
    return s;
}

// ---- encoder ---------------------------------------------------------------

/// Conv-ReLU-AvgPool stages; stage i output (the retained feature phi_i) has
/// spatial size H / 2^i. Inputs must be multiples of 2^L on both axes.
template <typename T>
struct Encoder {
    int in_ch = 0;
    std::vector<int> widths;
    std::vector<Conv2d<T>> convs;

    struct Cache {
        std::vector<ConvCache<T>> conv;
        std::vector<TensorT<T>> relu_out;
    };

    Encoder() = default;
    Encoder(int in, std::vector<int> widths_) : in_ch(in), widths(std::move(widths_)) {
        int prev = in_ch;
        for (int wd : widths) {
            convs.emplace_back(prev, wd);
            prev = wd;
        }
    }

    void init(RandomGen& rng) {
        for (auto& cv : convs) cv.init_he(rng);
    }

    int n_stages() const { return static_cast<int>(widths.size()); }
    int size_multiple() const { return 1 << n_stages(); }

    std::vector<TensorT<T>> features(const TensorT<T>& x) const {
        std::vector<TensorT<T>> phi;
        phi.reserve(convs.size());
        TensorT<T> cur = x;
        for (const auto& cv : convs) {
            cur = avgpool2(relu(cv.forward(cur)));
            phi.push_back(cur);
        }
        return phi;
    }

    std::vector<TensorT<T>> features(const TensorT<T>& x, Cache& cache) const {
        cache.conv.resize(convs.size());
        cache.relu_out.resize(convs.size());
        std::vector<TensorT<T>> phi;
        phi.reserve(convs.size());
        TensorT<T> cur = x;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            cache.relu_out[i] = relu(convs[i].forward(cur, cache.conv[i]));
            cur = avgpool2(cache.relu_out[i]);
            phi.push_back(cur);
        }
        return phi;
    }

    /// Backward from per-stage output gradients (empty tensor = no gradient at
    /// that stage). Weight gradients are accumulated into wgrads when given.
    TensorT<T> backward(const Cache& cache, const std::vector<TensorT<T>>& dphi,
                        std::vector<TensorT<T>>* wgrads) const {
        TensorT<T> carry;
        for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
            TensorT<T> g;
            if (carry.numel() > 0) {
                g = std::move(carry);
                if (i < static_cast<int>(dphi.size()) && dphi[i].numel() > 0) g += dphi[i];
            } else if (i < static_cast<int>(dphi.size()) && dphi[i].numel() > 0) {
                g = dphi[i];
            } else {
                g = TensorT<T>({widths[i], cache.relu_out[i].dim(1) / 2, cache.relu_out[i].dim(2) / 2});
            }
            TensorT<T> d = relu_backward(avgpool2_backward(g), cache.relu_out[i]);
            if (wgrads) {
                carry = convs[i].backward(cache.conv[i], d, (*wgrads)[2 * i], (*wgrads)[2 * i + 1]);
            } else {
                carry = convs[i].backward_data(cache.conv[i], d);
            }
        }
        return carry;
    }

    std::vector<TensorT<T>*> params() {
        std::vector<TensorT<T>*> p;
        for (auto& cv : convs) {
            p.push_back(&cv.w);
            p.push_back(&cv.b);
        }
        return p;
    }
    std::vector<const TensorT<T>*> params() const {
        std::vector<const TensorT<T>*> p;
        for (const auto& cv : convs) {
            p.push_back(&cv.w);
            p.push_back(&cv.b);
        }
        return p;
    }
};

// ---- decoder ---------------------------------------------------------------

/// Mirror of the encoder: Upsample-Conv-ReLU stages, final conv linear. Output
/// spatial size is input * 2^L; values are unbounded until clamped at the
/// image boundary.
template <typename T>
struct Decoder {
    int out_ch = 0;
    std::vector<int> widths;  // e.g. {128, 64, 32, 16}
    std::vector<Conv2d<T>> convs;

    struct Cache {
        std::vector<ConvCache<T>> conv;
        std::vector<TensorT<T>> relu_out;  // size L-1 (no relu on final conv)
    };

    Decoder() = default;
    Decoder(int out, std::vector<int> widths_) : out_ch(out), widths(std::move(widths_)) {
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) convs.emplace_back(widths[i], widths[i + 1]);
        convs.emplace_back(widths.back(), out_ch);
    }

    void init(RandomGen& rng) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].init_he(rng, i + 1 == convs.size() ? T(0.5) : T(0));
    }

    TensorT<T> forward(const TensorT<T>& t) const {
        TensorT<T> cur = t;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            cur = convs[i].forward(upsample2_nearest(cur));
            if (i + 1 < convs.size()) cur = relu(cur);
        }
        return cur;
    }

    TensorT<T> forward(const TensorT<T>& t, Cache& cache) const {
        cache.conv.resize(convs.size());
        cache.relu_out.assign(convs.size() - 1, TensorT<T>());
        TensorT<T> cur = t;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            cur = convs[i].forward(upsample2_nearest(cur), cache.conv[i]);
            if (i + 1 < convs.size()) {
                cur = relu(cur);
                cache.relu_out[i] = cur;
            }
        }
        return cur;
    }

    TensorT<T> backward(const Cache& cache, const TensorT<T>& dout,
                        std::vector<TensorT<T>>& wgrads) const {
        TensorT<T> g = dout;
        for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
            if (i + 1 < static_cast<int>(convs.size())) g = relu_backward(g, cache.relu_out[i]);
            TensorT<T> dup = convs[i].backward(cache.conv[i], g, wgrads[2 * i], wgrads[2 * i + 1]);
            g = upsample2_nearest_backward(dup);
        }
        return g;
    }

    std::vector<TensorT<T>*> params() {
        std::vector<TensorT<T>*> p;
        for (auto& cv : convs) {
            p.push_back(&cv.w);
            p.push_back(&cv.b);
        }
        return p;
    }
    std::vector<const TensorT<T>*> params() const {
        std::vector<const TensorT<T>*> p;
        for (const auto& cv : convs) {
            p.push_back(&cv.w);
            p.push_back(&cv.b);
        }
        return p;
    }
};

// ---- style transfer network -------------------------------------------------

template <typename T>
struct EncodeResult {
    std::vector<TensorT<T>> phi;
    PadInfo pad;
};

template <typename T>
struct StylizeResult {
    Image stylized;
    TensorT<T> target_feature;  // the AdaIN output, kept as the content target
};

template <typename T>
struct StyleTransfer {
    Encoder<T> encoder;
    Decoder<T> decoder;

    static StyleTransfer make(int image_channels, std::vector<int> widths, std::uint64_t seed) {
        StyleTransfer st;
        st.encoder = Encoder<T>(image_channels, widths);
        std::vector<int> dw(widths.rbegin(), widths.rend());
        st.decoder = Decoder<T>(image_channels, dw);
        RandomGen rng(seed);
        st.encoder.init(rng);
        st.decoder.init(rng);
        return st;
    }

    TensorT<T> image_tensor(const Image& img) const {
        Tensor t = image_to_chw(img);
        if constexpr (std::is_same_v<T, float>) {
            return t;
        } else {
            TensorT<T> o(t.shape);
            for (std::size_t i = 0; i < t.numel(); ++i) o.data[i] = static_cast<T>(t.data[i]);
            return o;
        }
    }

    /// Pads (reflect) to a multiple of 2^L and runs the encoder. Rejects
    /// images smaller than 2^L on either axis.
    EncodeResult<T> encode(const Image& img) const {
        const int m = encoder.size_multiple();
        if (img.h < m || img.w < m)
            throw std::invalid_argument("encode: image smaller than " + std::to_string(m) + " px");
        if (img.c != encoder.in_ch) throw std::invalid_argument("encode: channel count mismatch");
        EncodeResult<T> r;
        const Image padded = pad_reflect_to_multiple(img, m, r.pad);
        r.phi = encoder.features(image_tensor(padded));
        return r;
    }

    StylizeResult<T> stylize(const Image& content, const Image& style) const {
        return stylize_pre(content, encode(style).phi.back());
    }

    /// Stylize against a pre-encoded deepest style feature (the style bank is
    /// encoded once and reused across policies).
    StylizeResult<T> stylize_pre(const Image& content, const TensorT<T>& style_phi_deep) const {
        EncodeResult<T> c = encode(content);
        AdainResult<T> ad = adain(c.phi.back(), style_phi_deep);
        TensorT<T> out = decoder.forward(ad.out);
        StylizeResult<T> r;
        if constexpr (std::is_same_v<T, float>) {
            r.stylized = unpad(chw_to_image(out, true), c.pad);
        } else {
            Tensor of(out.shape);
            for (std::size_t i = 0; i < out.numel(); ++i) of.data[i] = static_cast<float>(out.data[i]);
            r.stylized = unpad(chw_to_image(of, true), c.pad);
        }
        r.target_feature = std::move(ad.out);
        return r;
    }

    /// Eq. content objective: MSE between the re-encoded stylized image's
    /// deepest feature and the AdaIN target feature.
    double content_loss(const Image& stylized, const TensorT<T>& target_feature) const {
        return mse(encode(stylized).phi.back(), target_feature);
    }

    /// Layer-wise mean/sigma distance between stylized output and style image.
    double style_loss(const Image& stylized, const Image& style) const {
        return style_loss_from_features(encode(stylized).phi, encode(style).phi);
    }

    std::vector<TensorT<T>*> params() {
        auto p = encoder.params();
        auto d = decoder.params();
        p.insert(p.end(), d.begin(), d.end());
        return p;
    }

    std::uint64_t encoder_hash() const { return hash_params(encoder.params()); }
    std::uint64_t hash() const {
        std::vector<const TensorT<T>*> all;
        for (auto* p : encoder.params()) all.push_back(p);
        for (auto* p : decoder.params()) all.push_back(p);
        return hash_params(all);
    }
};

using StyleTransferF = StyleTransfer<float>;

// ---- pretraining objective --------------------------------------------------

/// clamp to [0,1] with a pass-through-inside subgradient mask
template <typename T>
TensorT<T> clamp01_masked(const TensorT<T>& x, std::vector<char>& mask) {
    TensorT<T> y(x.shape);
    mask.resize(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T v = x.data[i];
        if (v < T(0)) {
            y.data[i] = T(0);
            mask[i] = 0;
        } else if (v > T(1)) {
            y.data[i] = T(1);
            mask[i] = 0;
        } else {
            y.data[i] = v;
            mask[i] = 1;
        }
    }
    return y;
}

/// Style objective between feature stacks with gradients on the first side
/// (and optionally the second), scaled by `weight`.
template <typename T>
double style_loss_grads(const std::vector<TensorT<T>>& phi_t, const std::vector<TensorT<T>>& phi_s,
                        double weight, std::vector<TensorT<T>>& dphi_t,
                        std::vector<TensorT<T>>* dphi_s) {
    double total = 0.0;
    for (std::size_t i = 0; i < phi_t.size(); ++i) {
        const auto st_t = channel_stats(phi_t[i]);
        const auto st_s = channel_stats(phi_s[i]);
        const int c = phi_t[i].dim(0);
        TensorT<T> dmu_t({c}), dsig_t({c}), dmu_s({c}), dsig_s({c});
        total += stats_distance_grad(st_t, st_s, dmu_t, dsig_t, dmu_s, dsig_s);
        dmu_t *= static_cast<T>(weight);
        dsig_t *= static_cast<T>(weight);
        channel_stats_backward(phi_t[i], st_t, dmu_t, dsig_t, dphi_t[i]);
        if (dphi_s) {
            dmu_s *= static_cast<T>(weight);
            dsig_s *= static_cast<T>(weight);
            channel_stats_backward(phi_s[i], st_s, dmu_s, dsig_s, (*dphi_s)[i]);
        }
    }
    return total;
}

template <typename T>
std::vector<TensorT<T>> zero_feature_grads(const std::vector<TensorT<T>>& phi) {
    std::vector<TensorT<T>> g;
    g.reserve(phi.size());
    for (const auto& p : phi) g.emplace_back(p.shape);
    return g;
}

struct StPairLoss {
    double l_c = 0.0, l_s = 0.0;
};

/// Forward and backward of the pretraining objective w_c*L_c + w_s*L_s for a
/// single (content, style) tensor pair; input dims must already be multiples
/// of 2^L. Weight gradients accumulate into enc_grads/dec_grads (either may
/// be null to freeze that side).
template <typename T>
StPairLoss st_pair_backward(const StyleTransfer<T>& st, const TensorT<T>& xc, const TensorT<T>& xs,
                            double w_c, double w_s, std::vector<TensorT<T>>* enc_grads,
                            std::vector<TensorT<T>>* dec_grads) {
    typename Encoder<T>::Cache cc, cs, ct;
    typename Decoder<T>::Cache dc;
    const auto phi_c = st.encoder.features(xc, cc);
    const auto phi_s = st.encoder.features(xs, cs);
    AdainResult<T> ad = adain(phi_c.back(), phi_s.back());
    const TensorT<T> out = st.decoder.forward(ad.out, dc);
    std::vector<char> mask;
    const TensorT<T> stylized = clamp01_masked(out, mask);
    const auto phi_t = st.encoder.features(stylized, ct);

    auto dphi_t = zero_feature_grads(phi_t);
    auto dphi_s = zero_feature_grads(phi_s);
    TensorT<T> d_ad_target(ad.out.shape);

    StPairLoss loss;
    TensorT<T> d_deep(phi_t.back().shape);
    loss.l_c = mse_grad(phi_t.back(), ad.out, &d_deep, &d_ad_target);
    d_deep *= static_cast<T>(w_c);
    d_ad_target *= static_cast<T>(w_c);
    dphi_t.back() += d_deep;

    loss.l_s = style_loss_grads(phi_t, phi_s, w_s, dphi_t, &dphi_s);

    TensorT<T> d_stylized = st.encoder.backward(ct, dphi_t, enc_grads);
    for (std::size_t i = 0; i < d_stylized.numel(); ++i)
        if (!mask[i]) d_stylized.data[i] = T(0);

    std::vector<TensorT<T>> dec_scratch;
    if (!dec_grads) {
        for (const auto* p : st.decoder.params()) dec_scratch.emplace_back(p->shape);
        dec_grads = &dec_scratch;
    }
    TensorT<T> d_ad = st.decoder.backward(dc, d_stylized, *dec_grads);
    d_ad += d_ad_target;

    TensorT<T> dphi_c_deep(phi_c.back().shape);
    adain_backward(phi_c.back(), phi_s.back(), ad, d_ad, dphi_c_deep, dphi_s.back());

    std::vector<TensorT<T>> dphi_c = zero_feature_grads(phi_c);
    dphi_c.back() = std::move(dphi_c_deep);
    st.encoder.backward(cc, dphi_c, enc_grads);
    st.encoder.backward(cs, dphi_s, enc_grads);
    return loss;
}

// ---- checkpoint io (float networks) -----------------------------------------

void save_style_checkpoint(const std::string& path, const StyleTransferF& st);
StyleTransferF load_style_checkpoint(const std::string& path);

}  // namespace s3tta
