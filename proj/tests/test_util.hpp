#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s3tta/image.hpp"
#include "s3tta/nn.hpp"
#include "s3tta/rng.hpp"

namespace testutil {

inline s3tta::Image random_image(int h, int w, int c, std::uint64_t seed) {
    s3tta::RandomGen rng(seed);
    s3tta::Image img(h, w, c);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

/// Smooth low-frequency test image (band-limited).
inline s3tta::Image smooth_image(int h, int w, int c, std::uint64_t seed) {
    s3tta::RandomGen rng(seed);
    s3tta::Image img(h, w, c);
    for (int ch = 0; ch < c; ++ch) {
        const double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0);
        const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x, ch) = static_cast<float>(
                    0.5 + 0.25 * std::sin(2 * M_PI * fx * x / w + px) +
                    0.2 * std::sin(2 * M_PI * fy * y / h + py));
    }
    return img;
}

/// Averages each 3x3 kernel over its four right-angle rotations; a network
/// whose kernels are all symmetrized this way commutes with right-angle
/// rotation when padding and resampling do.
template <typename T>
void symmetrize_c4(s3tta::Conv2d<T>& conv) {
    for (int oc = 0; oc < conv.out_ch; ++oc)
        for (int ic = 0; ic < conv.in_ch; ++ic) {
            T* k = conv.w.data.data() + (static_cast<std::size_t>(oc) * conv.in_ch + ic) * 9;
            // rotate kernel by 90 degrees: same permutation as raster rotation
            auto rot = [](const T* src, T* dst) {
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) dst[c * 3 + (2 - r)] = src[r * 3 + c];
            };
            T k1[9], k2[9], k3[9];
            rot(k, k1);
            rot(k1, k2);
            rot(k2, k3);
            for (int i = 0; i < 9; ++i) k[i] = (k[i] + k1[i] + k2[i] + k3[i]) / T(4);
        }
}

/// RAII temporary directory under the system temp root.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("s3tta_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
