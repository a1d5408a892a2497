#include "s3tta/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "s3tta/pngio.hpp"

namespace fs = std::filesystem;

namespace s3tta {

void save_style_bank(const std::string& dir, const StyleBank& bank) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw std::runtime_error("style bank: cannot write manifest in " + dir);
    manifest << "id\n";
    for (int i = 0; i < bank.size(); ++i) {
        manifest << bank.ids[i] << "\n";
        write_image_png((fs::path(dir) / (bank.ids[i] + ".png")).string(), bank.images[i]);
    }
}

StyleBank load_style_bank(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw std::runtime_error("style bank: missing manifest.csv in " + dir);
    StyleBank bank;
    std::string line;
    std::getline(manifest, line);  // header
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        bank.ids.push_back(line);
        bank.images.push_back(read_image_png((fs::path(dir) / (line + ".png")).string()));
    }
    return bank;
}

std::vector<AugmentationPolicy> enumerate_policies(std::vector<double> scales, int bank_size,
                                                   bool include_identity) {
    if (scales.empty()) throw std::invalid_argument("enumerate_policies: empty scale set");
    std::sort(scales.begin(), scales.end());
    scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
    std::vector<AugmentationPolicy> out;
    for (double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("enumerate_policies: scales must be positive");
        if (include_identity) out.push_back({s, -1});
        for (int j = 0; j < bank_size; ++j) out.push_back({s, j});
    }
    if (out.empty()) throw std::invalid_argument("enumerate_policies: no style choices enabled");
    return out;
}

AugmentOps make_default_ops(const StyleTransferF& st, const StyleBank& bank) {
    // encode the bank once; stylize_pre reuses the deepest features
    auto style_feats = std::make_shared<std::vector<Tensor>>();
    style_feats->reserve(bank.images.size());
    for (const auto& img : bank.images) style_feats->push_back(st.encode(img).phi.back());

    AugmentOps ops;
    ops.rotate_fn = [](const Image& img, RotationAngle k) { return rotate(img, k); };
    ops.resize_fn = [](const Image& img, double ratio) { return resize(img, ratio); };
    ops.stylize_fn = [&st, style_feats](const Image& img, int idx) {
        if (idx < 0 || idx >= static_cast<int>(style_feats->size()))
            throw std::invalid_argument("stylize: style index out of range");
        return st.stylize_pre(img, (*style_feats)[idx]).stylized;
    };
    return ops;
}

AugmentedBundle apply_policy(const Image& img, const AugmentationPolicy& policy,
                             const std::vector<RotationAngle>& angles, const AugmentOps& ops) {
    if (angles.empty()) throw std::invalid_argument("apply_policy: empty angle set");
    AugmentedBundle bundle;
    bundle.policy = policy;
    bundle.angles = angles;
    bundle.orig_h = img.h;
    bundle.orig_w = img.w;
    bundle.variants.reserve(angles.size());
    for (RotationAngle k : angles) {
        Image v = ops.rotate_fn(img, k);
        v = ops.resize_fn(v, policy.scale);
        if (policy.style_index >= 0) v = ops.stylize_fn(v, policy.style_index);
        bundle.variants.push_back(std::move(v));
    }
    return bundle;
}

AugmentedBundle apply_policy(const Image& img, const AugmentationPolicy& policy,
                             const std::vector<RotationAngle>& angles, const StyleTransferF& st,
                             const StyleBank& bank) {
    return apply_policy(img, policy, angles, make_default_ops(st, bank));
}

namespace {

/// Concatenated (mu, sigma) of the deepest encoder feature.
std::vector<double> feature_stat_vector(const StyleTransferF& st, const Image& img) {
    auto phi = st.encode(img).phi.back();
    auto stats = channel_stats(phi);
    std::vector<double> v;
    v.reserve(2 * stats.mu.numel());
    for (auto x : stats.mu.data) v.push_back(x);
    for (auto x : stats.sigma.data) v.push_back(x);
    return v;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

StyleBank build_style_bank(const std::vector<Image>& pool, const std::vector<std::string>& ids,
                           const StyleTransferF& st, int n, StyleSelection method,
                           std::uint64_t seed) {
    if (pool.empty()) throw std::invalid_argument("style bank: empty image pool");
    if (n < 1) throw std::invalid_argument("style bank: need at least one style");
    n = std::min<int>(n, static_cast<int>(pool.size()));

    std::vector<std::size_t> picks;
    if (method == StyleSelection::kRandom) {
        RandomGen rng(mix_seed(seed, 0x5741a5));
        std::vector<std::size_t> order(pool.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)  // Fisher-Yates
            std::swap(order[i - 1], order[rng.uniform_int(static_cast<std::uint64_t>(i))]);
        picks.assign(order.begin(), order.begin() + n);
    } else {
        std::vector<std::vector<double>> feats;
        feats.reserve(pool.size());
        for (const auto& img : pool) feats.push_back(feature_stat_vector(st, img));

        // seed pick: farthest from the pool mean
        std::vector<double> mean(feats[0].size(), 0.0);
        for (const auto& f : feats)
            for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += f[j];
        for (auto& m : mean) m /= static_cast<double>(feats.size());
        std::size_t first = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < feats.size(); ++i) {
            const double d = sq_dist(feats[i], mean);
            if (d > best) {
                best = d;
                first = i;
            }
        }
        picks.push_back(first);
        std::vector<double> min_dist(feats.size());
        for (std::size_t i = 0; i < feats.size(); ++i) min_dist[i] = sq_dist(feats[i], feats[first]);
        while (static_cast<int>(picks.size()) < n) {
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < feats.size(); ++i) {
                if (min_dist[i] > fd) {
                    fd = min_dist[i];
                    far = i;
                }
            }
            picks.push_back(far);
            for (std::size_t i = 0; i < feats.size(); ++i)
                min_dist[i] = std::min(min_dist[i], sq_dist(feats[i], feats[far]));
        }
    }

    StyleBank bank;
    for (std::size_t i : picks) {
        bank.ids.push_back(ids.empty() ? "style_" + std::to_string(i) : ids[i]);
        bank.images.push_back(pool[i]);
    }
    return bank;
}

}  // namespace s3tta
