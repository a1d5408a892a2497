#include "s3tta/segnet.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace s3tta {

void ProbMap::renormalize() {
    const std::size_t npix = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < npix; ++i) {
        float* q = p.data() + i * kNumClasses;
        float s = q[0] + q[1] + q[2];
        if (s <= 0.0f) {
            q[0] = q[1] = q[2] = 1.0f / kNumClasses;
        } else {
            q[0] /= s;
            q[1] /= s;
            q[2] /= s;
        }
    }
}

ProbMap rotate_probmap(const ProbMap& pm, RotationAngle k) {
    ProbMap out;
    if (k.quarter_turns % 2 == 0) {
        out.h = pm.h;
        out.w = pm.w;
    } else {
        out.h = pm.w;
        out.w = pm.h;
    }
    out.p.resize(pm.p.size());
    raster_rotate(pm.p.data(), pm.h, pm.w, kNumClasses, k.quarter_turns, out.p.data());
    return out;
}

ProbMap resize_probmap(const ProbMap& pm, int oh, int ow) {
    ProbMap out(oh, ow);
    raster_resize_bilinear(pm.p.data(), pm.h, pm.w, kNumClasses, oh, ow, out.p.data(), true);
    out.renormalize();
    return out;
}

ProbMap softmax_probmap(const Tensor& logits) {
    const int h = logits.dim(1), w = logits.dim(2);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    ProbMap pm(h, w);
    for (std::size_t i = 0; i < hw; ++i) {
        float l[kNumClasses];
        float mx = -1e30f;
        for (int k = 0; k < kNumClasses; ++k) {
            l[k] = logits.data[k * hw + i];
            mx = std::max(mx, l[k]);
        }
        float z = 0.0f;
        for (int k = 0; k < kNumClasses; ++k) {
            l[k] = std::exp(l[k] - mx);
            z += l[k];
        }
        for (int k = 0; k < kNumClasses; ++k) pm.p[i * kNumClasses + k] = l[k] / z;
    }
    return pm;
}

ProbMap seg_forward(const UNetF& net, const Image& img) {
    const int m = UNetF::size_multiple();
    if (img.h < m || img.w < m)
        throw std::invalid_argument("seg_forward: image smaller than " + std::to_string(m) + " px");
    if (img.c != net.in_ch) throw std::invalid_argument("seg_forward: channel count mismatch");
    PadInfo pad;
    const Image padded = pad_reflect_to_multiple(img, m, pad);
    ProbMap pm = softmax_probmap(net.logits(image_to_chw(padded)));
    if (!pad.any()) return pm;
    ProbMap out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int k = 0; k < kNumClasses; ++k) out.at(y, x, k) = pm.at(y + pad.top, x + pad.left, k);
    return out;
}

std::vector<std::uint8_t> labels_to_target3(const LabelMap& labels) {
    const int h = labels.h, w = labels.w;
    std::vector<std::uint8_t> t(static_cast<std::size_t>(h) * w, kBackground);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::int32_t id = labels.at(y, x);
            if (id == 0) continue;
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx) {
                    if (!dy && !dx) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w || labels.at(ny, nx) != id) edge = true;
                }
            t[static_cast<std::size_t>(y) * w + x] = edge ? kBoundary : kInterior;
        }
    return t;
}

double seg_loss(const ProbMap& pred, const LabelMap& labels) {
    if (pred.h != labels.h || pred.w != labels.w)
        throw std::invalid_argument("seg_loss: prediction/label dims mismatch");
    const auto target = labels_to_target3(labels);
    const std::size_t npix = target.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < npix; ++i) {
        const double p = std::max(static_cast<double>(pred.p[i * kNumClasses + target[i]]), 1e-12);
        loss += -std::log(p);
    }
    return loss / static_cast<double>(npix);
}

LabelMap decode_instances(const ProbMap& pred, int min_area) {
    const int h = pred.h, w = pred.w;
    LabelMap lab(h, w);

    // 4-connected components of the thresholded interior class
    std::int32_t next = 0;
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (lab.at(y, x) != 0 || pred.at(y, x, kInterior) <= 0.5f) continue;
            ++next;
            lab.at(y, x) = next;
            queue.push_back({y, x});
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                const int ny[4] = {cy - 1, cy + 1, cy, cy};
                const int nx[4] = {cx, cx, cx - 1, cx + 1};
                for (int i = 0; i < 4; ++i) {
                    if (ny[i] < 0 || ny[i] >= h || nx[i] < 0 || nx[i] >= w) continue;
                    if (lab.at(ny[i], nx[i]) == 0 && pred.at(ny[i], nx[i], kInterior) > 0.5f) {
                        lab.at(ny[i], nx[i]) = next;
                        queue.push_back({ny[i], nx[i]});
                    }
                }
            }
        }

    // absorb boundary-class pixels into the nearest component (multi-source BFS)
    auto is_boundary_class = [&](int y, int x) {
        const float pb = pred.at(y, x, kBoundary);
        return pb >= pred.at(y, x, kBackground) && pb >= pred.at(y, x, kInterior) &&
               pred.at(y, x, kInterior) <= 0.5f;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (lab.at(y, x) != 0) queue.push_back({y, x});
    while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        const std::int32_t id = lab.at(cy, cx);
        const int ny[4] = {cy - 1, cy + 1, cy, cy};
        const int nx[4] = {cx, cx, cx - 1, cx + 1};
        for (int i = 0; i < 4; ++i) {
            if (ny[i] < 0 || ny[i] >= h || nx[i] < 0 || nx[i] >= w) continue;
            if (lab.at(ny[i], nx[i]) == 0 && is_boundary_class(ny[i], nx[i])) {
                lab.at(ny[i], nx[i]) = id;
                queue.push_back({ny[i], nx[i]});
            }
        }
    }

    // drop small components, relabel contiguous
    std::vector<std::int64_t> area(static_cast<std::size_t>(next) + 1, 0);
    for (auto v : lab.v) ++area[v];
    for (auto& v : lab.v)
        if (v != 0 && area[v] < min_area) v = 0;
    relabel_contiguous(lab);
    return lab;
}

LabelMap predict_plain(const UNetF& net, const Image& img, int min_area) {
    return decode_instances(seg_forward(net, img), min_area);
}

S3ttaPrediction predict_s3tta_from_bundles(const UNetF& net, const std::vector<AugmentedBundle>& bundles,
                                           int orig_h, int orig_w, int min_area) {
    S3ttaPrediction out;
    auto [winner, scores] = select(bundles);
    out.winner = winner;
    out.scores = std::move(scores);

    const AugmentedBundle& wb = bundles[select_index(out.scores)];
    ProbMap acc;
    for (std::size_t i = 0; i < wb.variants.size(); ++i) {
        ProbMap pm = rotate_probmap_back(seg_forward(net, wb.variants[i]), wb.angles[i]);
        if (acc.p.empty()) {
            acc = std::move(pm);
        } else {
            for (std::size_t j = 0; j < acc.p.size(); ++j) acc.p[j] += pm.p[j];
        }
    }
    for (auto& v : acc.p) v /= static_cast<float>(wb.variants.size());
    acc = resize_probmap(acc, orig_h, orig_w);
    out.labels = decode_instances(acc, min_area);
    return out;
}

S3ttaPrediction predict_s3tta(const UNetF& net, const StyleTransferF& st, const StyleBank& bank,
                              const Image& img, const S3ttaConfig& cfg) {
    const auto policies = enumerate_policies(cfg.scales, bank.size(), cfg.include_identity);
    const AugmentOps ops = make_default_ops(st, bank);
    std::vector<AugmentedBundle> bundles;
    bundles.reserve(policies.size());
    for (const auto& pol : policies) bundles.push_back(apply_policy(img, pol, cfg.angles, ops));
    return predict_s3tta_from_bundles(net, bundles, img.h, img.w, cfg.min_area);
}

}  // namespace s3tta
