#include "s3tta/evalkit.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace s3tta {

std::vector<std::vector<double>> iou_matrix(const LabelMap& pred, const LabelMap& gt) {
    if (pred.h != gt.h || pred.w != gt.w) throw std::invalid_argument("iou_matrix: dims mismatch");
    const int kp = pred.max_label(), kg = gt.max_label();
    std::vector<std::int64_t> area_p(kp + 1, 0), area_g(kg + 1, 0);
    std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> inter;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        const auto p = pred.v[i], g = gt.v[i];
        if (p > 0) ++area_p[p];
        if (g > 0) ++area_g[g];
        if (p > 0 && g > 0) ++inter[{p, g}];
    }
    std::vector<std::vector<double>> iou(kp, std::vector<double>(kg, 0.0));
    for (const auto& [key, cnt] : inter) {
        const auto [p, g] = key;
        iou[p - 1][g - 1] =
            static_cast<double>(cnt) / static_cast<double>(area_p[p] + area_g[g] - cnt);
    }
    return iou;
}

namespace {

bool try_augment(int i, const std::vector<std::vector<int>>& adj, std::vector<int>& match_g,
                 std::vector<char>& used) {
    for (int j : adj[i]) {
        if (used[j]) continue;
        used[j] = 1;
        if (match_g[j] < 0 || try_augment(match_g[j], adj, match_g, used)) {
            match_g[j] = i;
            return true;
        }
    }
    return false;
}

}  // namespace

MatchResult match_instances(const LabelMap& pred, const LabelMap& gt, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("match: tau must be in (0, 1]");
    const auto iou = iou_matrix(pred, gt);
    const int kp = static_cast<int>(iou.size());
    const int kg = kp > 0 ? static_cast<int>(iou[0].size()) : gt.max_label();

    std::vector<std::vector<int>> adj(kp);
    for (int i = 0; i < kp; ++i)
        for (int j = 0; j < kg; ++j)
            if (iou[i][j] >= tau) adj[i].push_back(j);

    std::vector<int> match_g(kg, -1);
    int tp = 0;
    for (int i = 0; i < kp; ++i) {
        std::vector<char> used(kg, 0);
        if (try_augment(i, adj, match_g, used)) ++tp;
    }
    return {tp, kp - tp, kg - tp, tau};
}

double f1_at(const LabelMap& pred, const LabelMap& gt, double tau) {
    const MatchResult m = match_instances(pred, gt, tau);
    if (m.tp == 0 && m.fp == 0 && m.fn == 0) return 1.0;  // empty vs empty
    return 2.0 * m.tp / (2.0 * m.tp + m.fp + m.fn);
}

std::pair<double, double> dice_jaccard(const LabelMap& pred_fg, const LabelMap& gt_fg) {
    if (pred_fg.h != gt_fg.h || pred_fg.w != gt_fg.w)
        throw std::invalid_argument("dice_jaccard: dims mismatch");
    std::int64_t a = 0, b = 0, inter = 0;
    for (std::size_t i = 0; i < pred_fg.v.size(); ++i) {
        const bool pa = pred_fg.v[i] > 0, pb = gt_fg.v[i] > 0;
        a += pa;
        b += pb;
        inter += pa && pb;
    }
    if (a == 0 && b == 0) return {1.0, 1.0};
    const double dice = 2.0 * inter / static_cast<double>(a + b);
    const double uni = static_cast<double>(a + b - inter);
    const double jac = uni > 0.0 ? inter / uni : 1.0;
    return {dice, jac};
}

LabelMap baseline_aggregate_all(const UNetF& net, const std::vector<AugmentedBundle>& bundles,
                                int orig_h, int orig_w, int min_area) {
    if (bundles.empty()) throw std::invalid_argument("aggregate_all: no bundles");
    ProbMap acc(orig_h, orig_w);
    int count = 0;
    for (const auto& b : bundles) {
        for (std::size_t i = 0; i < b.variants.size(); ++i) {
            ProbMap pm = rotate_probmap_back(seg_forward(net, b.variants[i]), b.angles[i]);
            pm = resize_probmap(pm, orig_h, orig_w);
            for (std::size_t j = 0; j < acc.p.size(); ++j) acc.p[j] += pm.p[j];
            ++count;
        }
    }
    for (auto& v : acc.p) v /= static_cast<float>(count);
    acc.renormalize();
    return decode_instances(acc, min_area);
}

LabelMap baseline_aggregate_all(const UNetF& net, const StyleTransferF& st, const StyleBank& bank,
                                const Image& img, const S3ttaConfig& cfg) {
    const auto policies = enumerate_policies(cfg.scales, bank.size(), cfg.include_identity);
    const AugmentOps ops = make_default_ops(st, bank);
    std::vector<AugmentedBundle> bundles;
    bundles.reserve(policies.size());
    for (const auto& pol : policies) bundles.push_back(apply_policy(img, pol, cfg.angles, ops));
    return baseline_aggregate_all(net, bundles, img.h, img.w, cfg.min_area);
}

std::vector<std::pair<double, double>> embed_project(const std::vector<Image>& images,
                                                     const StyleTransferF& st) {
    if (images.size() < 3)
        throw std::invalid_argument("embed_project: need at least 3 images for a stable projection");
    const int d = st.encoder.widths.back();
    Eigen::MatrixXd feats(static_cast<Eigen::Index>(images.size()), d);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Tensor phi = st.encode(images[i]).phi.back();
        const std::size_t hw = static_cast<std::size_t>(phi.dim(1)) * phi.dim(2);
        for (int c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < hw; ++j) s += phi.data[c * hw + j];
            feats(static_cast<Eigen::Index>(i), c) = s / static_cast<double>(hw);
        }
    }
    const Eigen::RowVectorXd mean = feats.colwise().mean();
    feats.rowwise() -= mean;
    const Eigen::MatrixXd cov =
        feats.transpose() * feats / static_cast<double>(std::max<std::size_t>(images.size() - 1, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // top two components; fix sign so the largest-magnitude loading is positive
    Eigen::MatrixXd basis(d, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = es.eigenvectors().col(d - 1 - k);
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        basis.col(k) = v;
    }
    const Eigen::MatrixXd proj = feats * basis;
    std::vector<std::pair<double, double>> out(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        out[i] = {proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)};
    return out;
}

double mean_pairwise_distance(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) return 0.0;
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            s += std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
            ++n;
        }
    return s / static_cast<double>(n);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("metrics: cannot write " + path);
    out << "# instance matching: maximum-cardinality one-to-one assignment at IoU >= tau\n";
    out << "image_id,method,tau,f1,dice,jaccard\n";
    char buf[160];
    auto emit = [&](const MetricsRow& r) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.1f,%.1f,%.1f,%.1f\n", r.image_id.c_str(),
                      r.method.c_str(), r.tau, 100.0 * r.f1, 100.0 * r.dice, 100.0 * r.jaccard);
        out << buf;
    };
    for (const auto& r : rows) emit(r);

    // aggregate rows per (method, tau), preserving first-appearance order
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::pair<MetricsRow, int>> agg;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.method, r.tau);
        auto it = agg.find(key);
        if (it == agg.end()) {
            keys.push_back(key);
            MetricsRow m = r;
            m.image_id = "mean";
            agg.emplace(key, std::make_pair(m, 1));
        } else {
            it->second.first.f1 += r.f1;
            it->second.first.dice += r.dice;
            it->second.first.jaccard += r.jaccard;
            ++it->second.second;
        }
    }
    for (const auto& key : keys) {
        auto [m, n] = agg.at(key);
        m.f1 /= n;
        m.dice /= n;
        m.jaccard /= n;
        emit(m);
    }
}

}  // namespace s3tta
