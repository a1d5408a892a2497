#include "s3tta/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "s3tta/rng.hpp"
#include "s3tta/selector.hpp"

namespace s3tta {

namespace {

Tensor padded_image_tensor(const Image& img, int multiple, PadInfo& pad) {
    return image_to_chw(pad_reflect_to_multiple(img, multiple, pad));
}

/// 3-class target for a padded canvas: reflect-padded border pixels are
/// excluded from the loss.
std::vector<std::uint8_t> padded_target(const LabelMap& labels, const PadInfo& pad) {
    const auto inner = labels_to_target3(labels);
    if (!pad.any()) return inner;
    const int ph = labels.h + pad.top + pad.bottom;
    const int pw = labels.w + pad.left + pad.right;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(ph) * pw, kIgnoreClass);
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x)
            out[static_cast<std::size_t>(y + pad.top) * pw + (x + pad.left)] =
                inner[static_cast<std::size_t>(y) * labels.w + x];
    return out;
}

}  // namespace

PretrainResult pretrain_style(const std::vector<Sample>& data, const TrainConfig& cfg,
                              StyleTransferF& st) {
    if (data.size() < 2)
        throw std::invalid_argument("pretrain: need at least 2 images for content-style pairs");

    const int multiple = st.encoder.size_multiple();
    std::vector<Tensor> tensors;
    tensors.reserve(data.size());
    for (const auto& s : data) {
        PadInfo pad;
        tensors.push_back(padded_image_tensor(s.image, multiple, pad));
    }

    auto enc_params = st.encoder.params();
    auto dec_params = st.decoder.params();
    Adam<float> enc_adam(cfg.lr_pretrain * cfg.encoder_lr_scale);
    Adam<float> dec_adam(cfg.lr_pretrain);
    enc_adam.attach(enc_params);
    dec_adam.attach(dec_params);

    RandomGen rng(mix_seed(cfg.seed, 0x9ce7a11));
    PretrainResult result;
    result.history.reserve(cfg.pretrain_steps);

    for (int step = 0; step < cfg.pretrain_steps; ++step) {
        std::vector<Tensor> enc_grads = zeros_like_all(enc_params);
        std::vector<Tensor> dec_grads = zeros_like_all(dec_params);
        double l_c_sum = 0.0, l_s_sum = 0.0;

        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& xc = tensors[rng.uniform_int(tensors.size())];
            const auto& xs = tensors[rng.uniform_int(tensors.size())];
            const StPairLoss loss = st_pair_backward(st, xc, xs, cfg.weights.w_c, cfg.weights.w_s,
                                                     &enc_grads, &dec_grads);
            l_c_sum += loss.l_c;
            l_s_sum += loss.l_s;
        }

        const double inv = 1.0 / cfg.batch_size;
        for (auto& g : enc_grads) g *= static_cast<float>(inv);
        for (auto& g : dec_grads) g *= static_cast<float>(inv);

        const double l_c = l_c_sum * inv, l_s = l_s_sum * inv;
        const double weighted = cfg.weights.w_c * l_c + cfg.weights.w_s * l_s;
        if (!std::isfinite(weighted))
            throw std::runtime_error("pretrain diverged: non-finite loss at step " +
                                     std::to_string(step));
        result.history.push_back({step, l_c, l_s, weighted});

        enc_adam.step(enc_params, enc_grads);
        dec_adam.step(dec_params, dec_grads);
    }
    return result;
}

JointResult joint_train(const std::vector<Sample>& data, const StyleBank& bank,
                        const TrainConfig& cfg, StyleTransferF& st, UNetF& seg) {
    if (data.empty()) throw std::invalid_argument("joint_train: empty dataset");
    if (cfg.angles.empty() || cfg.angles.front().quarter_turns != 0)
        throw std::invalid_argument("joint_train: angle set must start with the 0-degree angle");

    JointResult result;
    result.encoder_hash_before = st.encoder_hash();

    const auto policies = enumerate_policies(cfg.scales, bank.size(), cfg.include_identity);
    const AugmentOps ops = make_default_ops(st, bank);

    // frozen per-style targets: deepest feature for adain, per-layer stats for
    // the style objective
    const int multiple = st.encoder.size_multiple();
    std::vector<Tensor> bank_deep;
    std::vector<std::vector<Tensor>> bank_phi;
    for (const auto& simg : bank.images) {
        auto enc = st.encode(simg);
        bank_deep.push_back(enc.phi.back());
        bank_phi.push_back(std::move(enc.phi));
    }

    auto dec_params = st.decoder.params();
    auto seg_params = seg.params();
    Adam<float> dec_adam(cfg.lr_joint);
    Adam<float> seg_adam(cfg.lr_joint);
    dec_adam.attach(dec_params);
    seg_adam.attach(seg_params);

    RandomGen rng(mix_seed(cfg.seed, 0x01b7));
    result.history.reserve(cfg.joint_steps);

    for (int step = 0; step < cfg.joint_steps; ++step) {
        const auto& sample = data[rng.uniform_int(data.size())];

        std::vector<AugmentedBundle> bundles;
        bundles.reserve(policies.size());
        for (const auto& pol : policies)
            bundles.push_back(apply_policy(sample.image, pol, cfg.angles, ops));
        auto [winner, scores] = select(bundles);

        const Image resized = resize(sample.image, winner.scale);
        const LabelMap labels_r = resize_nearest(sample.labels, resized.h, resized.w);

        std::vector<Tensor> dec_grads = zeros_like_all(dec_params);
        std::vector<Tensor> seg_grads = zeros_like_all(seg_params);
        double l_seg = 0.0, l_c = 0.0, l_s = 0.0;

        if (winner.style_index >= 0) {
            PadInfo pad;
            const Tensor xc = padded_image_tensor(resized, multiple, pad);
            const auto target = padded_target(labels_r, pad);

            Decoder<float>::Cache dc;
            Encoder<float>::Cache ct;
            const auto phi_c = st.encoder.features(xc);
            AdainResult<float> ad = adain(phi_c.back(), bank_deep[winner.style_index]);
            const Tensor out = st.decoder.forward(ad.out, dc);
            std::vector<char> mask;
            const Tensor stylized = clamp01_masked(out, mask);
            const auto phi_t = st.encoder.features(stylized, ct);

            UNetF::Cache sc;
            const Tensor logits = seg.logits(stylized, sc);
            Tensor dlogits(logits.shape);
            l_seg = softmax_ce_grad(logits, target, dlogits);
            dlogits *= static_cast<float>(cfg.weights.w_seg);
            Tensor d_styl = seg.backward(sc, dlogits, seg_grads);

            auto dphi_t = zero_feature_grads(phi_t);
            Tensor d_deep(phi_t.back().shape);
            l_c = mse_grad<float>(phi_t.back(), ad.out, &d_deep, nullptr);
            d_deep *= static_cast<float>(cfg.weights.w_c);
            dphi_t.back() += d_deep;
            l_s = style_loss_grads<float>(phi_t, bank_phi[winner.style_index], cfg.weights.w_s,
                                          dphi_t, nullptr);

            d_styl += st.encoder.backward(ct, dphi_t, nullptr);
            for (std::size_t i = 0; i < d_styl.numel(); ++i)
                if (!mask[i]) d_styl.data[i] = 0.0f;
            st.decoder.backward(dc, d_styl, dec_grads);
        } else {
            PadInfo pad;
            const Tensor x = padded_image_tensor(resized, UNetF::size_multiple(), pad);
            const auto target = padded_target(labels_r, pad);
            UNetF::Cache sc;
            const Tensor logits = seg.logits(x, sc);
            Tensor dlogits(logits.shape);
            l_seg = softmax_ce_grad(logits, target, dlogits);
            dlogits *= static_cast<float>(cfg.weights.w_seg);
            seg.backward(sc, dlogits, seg_grads);
        }
        ++result.grad_variant_count;

        const double l_total = total_loss(l_seg, l_c, l_s, cfg.weights);
        if (!std::isfinite(l_total))
            throw std::runtime_error("joint training diverged: non-finite loss at step " +
                                     std::to_string(step));
        result.history.push_back({step, l_seg, l_c, l_s, l_total, winner.scale, winner.style_index});

        dec_adam.step(dec_params, dec_grads);
        seg_adam.step(seg_params, seg_grads);
    }

    result.encoder_hash_after = st.encoder_hash();
    return result;
}

void write_pretrain_log(const std::string& path, const PretrainResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,l_c,l_s,weighted\n";
    char buf[128];
    for (const auto& s : r.history) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", s.step, s.l_c, s.l_s, s.weighted);
        out << buf;
    }
}

void write_joint_log(const std::string& path, const JointResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,l_seg,l_c,l_s,l_total,selected_scale,selected_style\n";
    char buf[192];
    for (const auto& s : r.history) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%g,%d\n", s.step, s.l_seg, s.l_c,
                      s.l_s, s.l_total, s.selected_scale, s.selected_style);
        out << buf;
    }
}

}  // namespace s3tta
