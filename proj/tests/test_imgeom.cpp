#include <doctest.h>

#include "s3tta/image.hpp"
#include "test_util.hpp"

using namespace s3tta;

namespace {

/// Independent bilinear oracle: direct evaluation at half-pixel centers with
/// edge clamping, no shared code with the implementation.
double bilinear_oracle(const Image& img, int ch, double sy, double sx) {
    auto cl = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const double ty = sy - y0, tx = sx - x0;
    const double v00 = img.at(cl(y0, img.h), cl(x0, img.w), ch);
    const double v01 = img.at(cl(y0, img.h), cl(x0 + 1, img.w), ch);
    const double v10 = img.at(cl(y0 + 1, img.h), cl(x0, img.w), ch);
    const double v11 = img.at(cl(y0 + 1, img.h), cl(x0 + 1, img.w), ch);
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
}

}  // namespace

TEST_SUITE_BEGIN("imgeom");

TEST_CASE("rotate by zero is the identity") {
    const Image img = testutil::random_image(5, 7, 3, 11);
    const Image out = rotate(img, RotationAngle(0));
    CHECK(out.px == img.px);
    CHECK(out.h == img.h);
    CHECK(out.w == img.w);
}

TEST_CASE("rotate quarter turn on a 2x1 image") {
    Image img(2, 1, 1);
    img.at(0, 0, 0) = 0.25f;  // a
    img.at(1, 0, 0) = 0.75f;  // b
    const Image out = rotate(img, RotationAngle(1));
    REQUIRE(out.h == 1);
    REQUIRE(out.w == 2);
    CHECK(out.at(0, 0, 0) == 0.75f);  // [[b, a]]
    CHECK(out.at(0, 1, 0) == 0.25f);
}

TEST_CASE("rotate then inverse rotation is bit-exact identity") {
    for (int c : {1, 3}) {
        const Image img = testutil::random_image(6, 9, c, 23 + c);
        for (int k = 0; k < 4; ++k) {
            const RotationAngle a(k);
            const Image back = rotate(rotate(img, a), a.inverse());
            CHECK(back.px == img.px);
        }
    }
}

TEST_CASE("rotate commutes with pointwise maps") {
    const Image img = testutil::random_image(8, 5, 1, 31);
    auto f = [](float v) { return v * v * 0.5f; };
    for (int k = 0; k < 4; ++k) {
        Image a = rotate(img, RotationAngle(k));
        for (auto& v : a.px) v = f(v);
        Image b = img;
        for (auto& v : b.px) v = f(v);
        b = rotate(b, RotationAngle(k));
        CHECK(a.px == b.px);
    }
}

TEST_CASE("resize with ratio 1 is pixel-identical") {
    const Image img = testutil::random_image(7, 4, 3, 41);
    const Image out = resize(img, 1.0);
    CHECK(out.px == img.px);
}

TEST_CASE("resize of a constant image is constant") {
    Image img(2, 2, 1);
    for (auto& v : img.px) v = 0.5f;
    const Image out = resize(img, 2.0);
    REQUIRE(out.h == 4);
    REQUIRE(out.w == 4);
    for (float v : out.px) CHECK(v == 0.5f);

    Image odd(5, 3, 3);
    for (auto& v : odd.px) v = 0.37f;
    for (float v : resize(odd, 0.73).px) CHECK(v == 0.37f);
}

TEST_CASE("resize doubling matches the hand bilinear oracle") {
    Image img(1, 2, 1);
    img.at(0, 0, 0) = 0.0f;
    img.at(0, 1, 0) = 1.0f;
    const Image out = resize(img, 2.0);
    REQUIRE(out.h == 2);
    REQUIRE(out.w == 4);
    // sample coords (x+0.5)/2-0.5: -0.25, 0.25, 0.75, 1.25 -> 0, 0.25, 0.75, 1
    const double expected[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out.at(y, x, 0) == doctest::Approx(expected[x]).epsilon(1e-7));
}

TEST_CASE("resize matches oracle on random images and ratios") {
    const Image img = testutil::random_image(9, 6, 3, 57);
    for (double ratio : {0.5, 0.7, 1.3, 2.0}) {
        const Image out = resize(img, ratio);
        const double fy = static_cast<double>(img.h) / out.h;
        const double fx = static_cast<double>(img.w) / out.w;
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                for (int ch = 0; ch < 3; ++ch) {
                    const double want =
                        bilinear_oracle(img, ch, (y + 0.5) * fy - 0.5, (x + 0.5) * fx - 0.5);
                    CHECK(out.at(y, x, ch) == doctest::Approx(want).epsilon(1e-6));
                }
    }
}

TEST_CASE("resize rejects zero-size output") {
    const Image img = testutil::random_image(4, 4, 1, 3);
    CHECK_THROWS_AS(resize(img, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(resize(img, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(resize(img, 0.0), std::invalid_argument);
}

TEST_CASE("upscale then downscale approximates identity on smooth images") {
    for (std::uint64_t seed : {71u, 72u, 73u}) {
        const Image img = testutil::smooth_image(24, 24, 1, seed);
        const Image back = resize(resize(img, 2.0), 0.5);
        REQUIRE(back.h == img.h);
        double mae = 0.0;
        for (std::size_t i = 0; i < img.px.size(); ++i)
            mae += std::abs(static_cast<double>(img.px[i]) - back.px[i]);
        mae /= static_cast<double>(img.px.size());
        CHECK(mae <= 0.02);
    }
}

TEST_CASE("resize commutes bit-exactly with rotation for dyadic ratios") {
    const Image img = testutil::random_image(12, 12, 3, 91);
    for (int k = 0; k < 4; ++k) {
        for (double ratio : {0.5, 2.0}) {
            const Image a = resize(rotate(img, RotationAngle(k)), ratio);
            const Image b = rotate(resize(img, ratio), RotationAngle(k));
            CHECK(a.px == b.px);
        }
    }
}

TEST_CASE("geometry ops keep values in range") {
    const Image img = testutil::random_image(10, 14, 3, 101);
    CHECK(image_valid(rotate(img, RotationAngle(3))));
    CHECK(image_valid(resize(img, 1.7)));
    CHECK(image_valid(resize(img, 0.4)));
}

TEST_CASE("reflect padding round-trips through unpad") {
    const Image img = testutil::random_image(45, 51, 3, 113);
    PadInfo pad;
    const Image padded = pad_reflect_to_multiple(img, 16, pad);
    CHECK(padded.h == 48);
    CHECK(padded.w == 64);
    const Image back = unpad(padded, pad);
    CHECK(back.px == img.px);
}

TEST_CASE("nearest label resize preserves label values") {
    LabelMap lab(4, 4);
    lab.at(1, 1) = 5;
    lab.at(2, 2) = 9;
    const LabelMap up = resize_nearest(lab, 8, 8);
    for (auto v : up.v) CHECK((v == 0 || v == 5 || v == 9));
    const LabelMap back = resize_nearest(up, 4, 4);
    CHECK(back.v == lab.v);
}

TEST_CASE("relabel_contiguous compacts ids in scan order") {
    LabelMap lab(2, 3);
    lab.at(0, 0) = 7;
    lab.at(0, 2) = 3;
    lab.at(1, 1) = 7;
    const int k = relabel_contiguous(lab);
    CHECK(k == 2);
    CHECK(lab.at(0, 0) == 1);
    CHECK(lab.at(0, 2) == 2);
    CHECK(lab.at(1, 1) == 1);
}

TEST_SUITE_END();
