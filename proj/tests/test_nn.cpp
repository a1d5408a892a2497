#include <doctest.h>

#include "s3tta/nn.hpp"
#include "test_util.hpp"

using namespace s3tta;

namespace {

TensorD random_tensor(const std::vector<int>& shape, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0) {
    RandomGen rng(seed);
    TensorD t(shape);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Central finite difference of f w.r.t. one scalar location.
template <typename F>
double central_diff(F&& f, double& x, double h) {
    const double orig = x;
    x = orig + h;
    const double fp = f();
    x = orig - h;
    const double fm = f();
    x = orig;
    return (fp - fm) / (2.0 * h);
}

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

/// Naive direct 3x3 reflect-padded convolution, independent of im2col.
TensorD conv_oracle(const Conv2d<double>& cv, const TensorD& x) {
    const int h = x.dim(1), w = x.dim(2);
    auto refl = [](int i, int n) {
        if (n == 1) return 0;
        const int p = 2 * (n - 1);
        i = std::abs(i) % p;
        return i < n ? i : p - i;
    };
    TensorD y({cv.out_ch, h, w});
    for (int oc = 0; oc < cv.out_ch; ++oc)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double s = cv.b.data[oc];
                for (int ic = 0; ic < cv.in_ch; ++ic)
                    for (int ky = -1; ky <= 1; ++ky)
                        for (int kx = -1; kx <= 1; ++kx)
                            s += cv.w.data[(oc * cv.in_ch + ic) * 9 + (ky + 1) * 3 + (kx + 1)] *
                                 x.at(ic, refl(yy + ky, h), refl(xx + kx, w));
                y.at(oc, yy, xx) = s;
            }
    return y;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("conv forward matches the direct oracle") {
    RandomGen rng(7);
    Conv2d<double> cv(3, 5);
    cv.init_he(rng, 0.1);
    const TensorD x = random_tensor({3, 6, 4}, 9);
    const TensorD y = cv.forward(x);
    const TensorD want = conv_oracle(cv, x);
    REQUIRE(y.shape == want.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(rel_err(y.data[i], want.data[i]) < 1e-12);
}

TEST_CASE("conv backward matches finite differences") {
    RandomGen rng(17);
    Conv2d<double> cv(2, 3);
    cv.init_he(rng, 0.05);
    TensorD x = random_tensor({2, 5, 4}, 19);
    const TensorD proj = random_tensor({3, 5, 4}, 21);

    auto loss = [&]() {
        const TensorD y = cv.forward(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += proj.data[i] * y.data[i];
        return s;
    };

    ConvCache<double> cache;
    cv.forward(x, cache);
    TensorD dw(cv.w.shape), db(cv.b.shape);
    const TensorD dx = cv.backward(cache, proj, dw, db);

    RandomGen pick(23);
    for (int trial = 0; trial < 30; ++trial) {
        const auto iw = pick.uniform_int(cv.w.numel());
        CHECK(rel_err(dw.data[iw], central_diff(loss, cv.w.data[iw], 1e-6)) < 1e-6);
        const auto ix = pick.uniform_int(x.numel());
        CHECK(rel_err(dx.data[ix], central_diff(loss, x.data[ix], 1e-6)) < 1e-6);
    }
    for (std::size_t ib = 0; ib < cv.b.numel(); ++ib)
        CHECK(rel_err(db.data[ib], central_diff(loss, cv.b.data[ib], 1e-6)) < 1e-6);

    // input-only variant agrees with the full backward
    const TensorD dx2 = cv.backward_data(cache, proj);
    CHECK(dx2.data == dx.data);
}

TEST_CASE("pool and upsample backward are exact transposes") {
    TensorD x = random_tensor({2, 4, 6}, 31);
    const TensorD proj_small = random_tensor({2, 2, 3}, 33);
    auto pool_loss = [&]() {
        const TensorD y = avgpool2(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += proj_small.data[i] * y.data[i];
        return s;
    };
    const TensorD dx = avgpool2_backward(proj_small);
    for (std::size_t i = 0; i < x.numel(); ++i)
        CHECK(rel_err(dx.data[i], central_diff(pool_loss, x.data[i], 1e-6)) < 1e-6);

    TensorD z = random_tensor({2, 2, 3}, 35);
    const TensorD proj_big = random_tensor({2, 4, 6}, 37);
    auto up_loss = [&]() {
        const TensorD y = upsample2_nearest(z);
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += proj_big.data[i] * y.data[i];
        return s;
    };
    const TensorD dz = upsample2_nearest_backward(proj_big);
    for (std::size_t i = 0; i < z.numel(); ++i)
        CHECK(rel_err(dz.data[i], central_diff(up_loss, z.data[i], 1e-6)) < 1e-6);
}

TEST_CASE("relu backward masks by activation") {
    TensorD x({1, 2, 2}, {-1.0, 0.5, 0.0, 2.0});
    const TensorD y = relu(x);
    const TensorD dy({1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
    const TensorD dx = relu_backward(dy, y);
    CHECK(dx.data == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("adam leaves parameters untouched on zero gradients") {
    RandomGen rng(43);
    Conv2d<float> cv(2, 2);
    cv.init_he(rng);
    const auto before_w = cv.w.data;
    std::vector<Tensor*> params{&cv.w, &cv.b};
    Adam<float> opt(1e-3);
    opt.attach(params);
    std::vector<Tensor> grads = zeros_like_all(params);
    for (int i = 0; i < 5; ++i) opt.step(params, grads);
    CHECK(cv.w.data == before_w);
}

TEST_CASE("adam descends a quadratic") {
    Tensor p({4});
    for (auto& v : p.data) v = 2.0f;
    std::vector<Tensor*> params{&p};
    Adam<float> opt(0.05);
    opt.attach(params);
    for (int i = 0; i < 400; ++i) {
        std::vector<Tensor> g(1, Tensor({4}));
        for (int j = 0; j < 4; ++j) g[0].data[j] = 2.0f * p.data[j];
        opt.step(params, g);
    }
    for (auto v : p.data) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("parameter hashing detects any change") {
    RandomGen rng(53);
    Conv2d<float> cv(1, 2);
    cv.init_he(rng);
    std::vector<const Tensor*> params{&cv.w, &cv.b};
    const auto h0 = hash_params(params);
    CHECK(h0 == hash_params(params));
    cv.w.data[5] += 1e-7f;
    CHECK(h0 != hash_params(params));
}

TEST_SUITE_END();
