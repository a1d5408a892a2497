#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "s3tta/evalkit.hpp"
#include "test_util.hpp"

using namespace s3tta;

namespace {

LabelMap from_grid(const std::vector<std::vector<int>>& rows) {
    LabelMap lab(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int y = 0; y < lab.h; ++y)
        for (int x = 0; x < lab.w; ++x) lab.at(y, x) = rows[y][x];
    return lab;
}

/// Exhaustive-permutation matching oracle: maximum number of one-to-one pairs
/// with IoU >= tau, trying every injective assignment.
int exhaustive_tp(const LabelMap& pred, const LabelMap& gt, double tau) {
    const auto iou = iou_matrix(pred, gt);
    const int kp = static_cast<int>(iou.size());
    const int kg = kp ? static_cast<int>(iou[0].size()) : 0;
    if (kp == 0 || kg == 0) return 0;
    std::vector<int> gts(kg);
    for (int j = 0; j < kg; ++j) gts[j] = j;
    int best = 0;
    std::sort(gts.begin(), gts.end());
    do {
        int tp = 0;
        for (int i = 0; i < std::min(kp, kg); ++i)
            if (iou[i][gts[i]] >= tau) ++tp;
        best = std::max(best, tp);
    } while (std::next_permutation(gts.begin(), gts.end()));
    if (kp > kg) {
        // also permute which preds participate
        std::vector<int> ps(kp);
        for (int i = 0; i < kp; ++i) ps[i] = i;
        do {
            int tp = 0;
            for (int j = 0; j < kg; ++j)
                if (iou[ps[j]][j] >= tau) ++tp;
            best = std::max(best, tp);
        } while (std::next_permutation(ps.begin(), ps.end()));
    }
    return best;
}

LabelMap random_instances(int h, int w, int k, std::uint64_t seed) {
    RandomGen rng(seed);
    LabelMap lab(h, w);
    for (int id = 1; id <= k; ++id) {
        const int cy = rng.uniform_int(0, h - 1), cx = rng.uniform_int(0, w - 1);
        const int ry = rng.uniform_int(1, 2), rx = rng.uniform_int(1, 2);
        for (int y = std::max(0, cy - ry); y <= std::min(h - 1, cy + ry); ++y)
            for (int x = std::max(0, cx - rx); x <= std::min(w - 1, cx + rx); ++x)
                lab.at(y, x) = id;
    }
    relabel_contiguous(lab);
    return lab;
}

}  // namespace

TEST_SUITE_BEGIN("evalkit");

TEST_CASE("iou matrix on disjoint, identical, and overlapping instances") {
    const LabelMap self = from_grid({{1, 1, 0}, {0, 0, 2}, {0, 0, 2}});
    const auto diag = iou_matrix(self, self);
    REQUIRE(diag.size() == 2);
    CHECK(diag[0][0] == 1.0);
    CHECK(diag[1][1] == 1.0);
    CHECK(diag[0][1] == 0.0);

    const LabelMap a = from_grid({{1, 0}, {0, 0}});
    const LabelMap b = from_grid({{0, 0}, {0, 1}});
    CHECK(iou_matrix(a, b)[0][0] == 0.0);

    // two 2x2 squares sharing 2 px on a 4x4 grid -> IoU 2/6
    const LabelMap p = from_grid({{0, 0, 0, 0}, {0, 1, 1, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}});
    const LabelMap g = from_grid({{0, 0, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 0, 0}});
    CHECK(iou_matrix(p, g)[0][0] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));

    LabelMap mismatched(3, 5);
    CHECK_THROWS_AS(iou_matrix(p, mismatched), std::invalid_argument);
}

TEST_CASE("f1 basics: perfect prediction, partial match, empty cases") {
    const LabelMap gt = from_grid({{1, 1, 0, 2}, {1, 1, 0, 2}, {0, 0, 0, 0}});
    for (double tau : {0.5, 0.6, 0.7}) CHECK(f1_at(gt, gt, tau) == 1.0);

    // one of two instances predicted at high IoU: tp=1, fp=0, fn=1 -> 2/3
    const LabelMap partial = from_grid({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 0, 0}});
    CHECK(f1_at(partial, gt, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const LabelMap empty(3, 4);
    CHECK(f1_at(empty, empty, 0.5) == 1.0);
    CHECK(f1_at(empty, gt, 0.5) == 0.0);
    CHECK(f1_at(gt, empty, 0.5) == 0.0);
}

TEST_CASE("matching is optimal: agrees with exhaustive permutations") {
    // crafted case where greedy row-order matching is suboptimal: pred 1
    // overlaps gt 1 and gt 2; pred 2 overlaps only gt 1. Greedy (pred 1 ->
    // gt 1) yields tp=1; optimal (pred 1 -> gt 2, pred 2 -> gt 1) yields 2.
    const LabelMap pred = from_grid({
        {1, 1, 1, 1, 0, 0},
        {1, 1, 1, 1, 0, 0},
        {2, 2, 0, 0, 0, 0},
        {2, 2, 0, 0, 0, 0},
    });
    const LabelMap gt = from_grid({
        {1, 1, 2, 2, 2, 2},
        {1, 1, 2, 2, 2, 2},
        {1, 1, 0, 0, 0, 0},
        {1, 1, 0, 0, 0, 0},
    });
    const double tau = 0.3;
    const MatchResult m = match_instances(pred, gt, tau);
    CHECK(m.tp == exhaustive_tp(pred, gt, tau));
    CHECK(m.tp == 2);

    // randomized small cases, several thresholds
    int cases = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const LabelMap p = random_instances(8, 8, 1 + seed % 5, seed);
        const LabelMap g = random_instances(8, 8, 1 + (seed * 7) % 5, seed + 1000);
        if (p.max_label() > 5 || g.max_label() > 5) continue;
        for (double t : {0.3, 0.5, 0.7}) {
            CHECK(match_instances(p, g, t).tp == exhaustive_tp(p, g, t));
            ++cases;
        }
    }
    CHECK(cases >= 20);
}

TEST_CASE("matching accounting is one-to-one") {
    for (std::uint64_t seed = 50; seed < 60; ++seed) {
        const LabelMap p = random_instances(10, 10, 4, seed);
        const LabelMap g = random_instances(10, 10, 3, seed + 99);
        const MatchResult m = match_instances(p, g, 0.5);
        CHECK(m.tp + m.fp == p.max_label());
        CHECK(m.tp + m.fn == g.max_label());
        CHECK(m.tp <= std::min(p.max_label(), g.max_label()));
    }
}

TEST_CASE("f1 is invariant to relabeling and non-increasing in tau") {
    const LabelMap p = random_instances(12, 12, 4, 7);
    const LabelMap g = random_instances(12, 12, 4, 8);
    LabelMap p_swapped = p;
    for (auto& v : p_swapped.v) v = v == 0 ? 0 : (static_cast<int>(p.max_label()) + 1 - v);
    double prev = 1.1;
    for (double tau : {0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
        const double f = f1_at(p, g, tau);
        CHECK(f1_at(p_swapped, g, tau) == doctest::Approx(f).epsilon(1e-12));
        CHECK(f <= prev + 1e-12);
        prev = f;
    }
}

TEST_CASE("dice and jaccard basics and identity") {
    const LabelMap a = from_grid({{1, 1, 0}, {1, 1, 0}});
    CHECK(dice_jaccard(a, a) == std::make_pair(1.0, 1.0));

    const LabelMap b = from_grid({{0, 0, 1}, {0, 0, 1}});
    CHECK(dice_jaccard(a, b) == std::make_pair(0.0, 0.0));

    // |A|=|B|=4, intersection 2
    const LabelMap c = from_grid({{0, 1, 1}, {0, 1, 1}});
    const auto [dice, jac] = dice_jaccard(a, c);
    CHECK(dice == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(jac == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const LabelMap empty(2, 3);
    CHECK(dice_jaccard(empty, empty) == std::make_pair(1.0, 1.0));

    // dice = 2j/(1+j) on random masks
    RandomGen rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        LabelMap x(6, 6), y(6, 6);
        for (auto& v : x.v) v = rng.uniform() < 0.4 ? 1 : 0;
        for (auto& v : y.v) v = rng.uniform() < 0.4 ? 1 : 0;
        const auto [d, j] = dice_jaccard(x, y);
        CHECK(d >= j - 1e-12);
        CHECK(std::abs(d - 2.0 * j / (1.0 + j)) <= 1e-12);
    }
}

TEST_CASE("aggregate-all with one trivial bundle equals the plain prediction") {
    UNetF net(3, 8);
    RandomGen rng(23);
    net.init(rng);
    const Image img = testutil::random_image(24, 24, 3, 29);

    AugmentedBundle b;
    b.policy = {1.0, -1};
    b.angles = {RotationAngle(0)};
    b.variants = {img};
    b.orig_h = b.orig_w = 24;
    const LabelMap agg = baseline_aggregate_all(net, {b}, 24, 24, 9);
    const LabelMap plain = predict_plain(net, img, 9);
    CHECK(agg.v == plain.v);
}

TEST_CASE("a noise policy drags aggregate-all below select-one") {
    // overfit a tiny net on one synthetic-ish blob image so predictions are
    // meaningful, then compare strategies when a pure-noise policy is present
    UNetF net(1, 8);
    RandomGen rng(31);
    net.init(rng);

    Image img(24, 24, 1);
    LabelMap gt(24, 24);
    for (auto& v : img.px) v = 0.2f;
    for (int y = 6; y < 14; ++y)
        for (int x = 6; x < 14; ++x) {
            img.at(y, x, 0) = 0.85f;
            gt.at(y, x) = 1;
        }
    for (int y = 16; y < 22; ++y)
        for (int x = 14; x < 21; ++x) {
            img.at(y, x, 0) = 0.8f;
            gt.at(y, x) = 2;
        }

    // a few dozen gradient steps on this single image
    const auto target = labels_to_target3(gt);
    auto params = net.params();
    Adam<float> opt(5e-3);
    opt.attach(params);
    for (int step = 0; step < 120; ++step) {
        UNetF::Cache cache;
        const Tensor logits = net.logits(image_to_chw(img), cache);
        Tensor dlogits(logits.shape);
        softmax_ce_grad(logits, target, dlogits);
        std::vector<Tensor> grads = zeros_like_all(params);
        net.backward(cache, dlogits, grads);
        opt.step(params, grads);
    }
    REQUIRE(f1_at(predict_plain(net, img, 9), gt, 0.5) == 1.0);

    // bundle 1: clean identity; bundle 2: stylize destroys content into noise
    AugmentOps ops;
    ops.rotate_fn = [](const Image& im, RotationAngle k) { return rotate(im, k); };
    ops.resize_fn = [](const Image& im, double r) { return resize(im, r); };
    RandomGen noise_rng(37);
    ops.stylize_fn = [&noise_rng](const Image& im, int) {
        Image out = im;
        for (auto& v : out.px) v = static_cast<float>(noise_rng.uniform());
        return out;
    };
    const std::vector<RotationAngle> angles{RotationAngle(0), RotationAngle(1), RotationAngle(2),
                                            RotationAngle(3)};
    std::vector<AugmentedBundle> bundles;
    bundles.push_back(apply_policy(img, {1.0, -1}, angles, ops));
    bundles.push_back(apply_policy(img, {1.0, 0}, angles, ops));

    const auto select_one = predict_s3tta_from_bundles(net, bundles, 24, 24, 9);
    CHECK(select_one.winner == AugmentationPolicy{1.0, -1});
    const double f1_select = f1_at(select_one.labels, gt, 0.5);
    const double f1_agg = f1_at(baseline_aggregate_all(net, bundles, 24, 24, 9), gt, 0.5);
    CHECK(f1_select >= 0.5);
    CHECK(f1_agg < f1_select);
}

TEST_CASE("embedding projection is deterministic with sane geometry") {
    StyleTransferF st = StyleTransferF::make(3, {8, 16}, 41);
    std::vector<Image> images;
    for (int i = 0; i < 5; ++i) images.push_back(testutil::random_image(16, 16, 3, 50 + i));
    images.push_back(images[0]);  // duplicate

    const auto pts = embed_project(images, st);
    REQUIRE(pts.size() == images.size());
    CHECK(pts[0].first == doctest::Approx(pts[5].first).epsilon(1e-9));
    CHECK(pts[0].second == doctest::Approx(pts[5].second).epsilon(1e-9));

    const auto pts2 = embed_project(images, st);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].first == pts2[i].first);
        CHECK(pts[i].second == pts2[i].second);
    }

    CHECK_THROWS_AS(embed_project({images[0], images[1]}, st), std::invalid_argument);
}

TEST_CASE("metrics csv carries per-image rows plus mean rows in percent") {
    testutil::TempDir tmp("metrics");
    std::vector<MetricsRow> rows;
    rows.push_back({"img0", "baseline", 0.5, 1.0, 1.0, 1.0});
    rows.push_back({"img1", "baseline", 0.5, 0.5, 0.8, 0.6});
    const std::string path = tmp.sub("metrics.csv");
    write_metrics_csv(path, rows);

    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 5);  // comment, header, 2 rows, 1 mean row
    CHECK(lines[2] == "img0,baseline,0.5,100.0,100.0,100.0");
    CHECK(lines[3] == "img1,baseline,0.5,50.0,80.0,60.0");
    CHECK(lines[4] == "mean,baseline,0.5,75.0,90.0,80.0");
}

TEST_SUITE_END();
