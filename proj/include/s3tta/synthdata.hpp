#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s3tta/image.hpp"

namespace s3tta {

/// Controls one synthetic domain: cell geometry (scale domain) and
/// intensity/tint/texture (style domain).
struct DomainSpec {
    int img_h = 64, img_w = 64;
    int channels = 3;
    double radius_min = 8.0, radius_max = 12.0;
    int count_min = 2, count_max = 5;
    double fg_mean = 0.78, fg_std = 0.06;
    double bg_mean = 0.30, bg_std = 0.04;
    double texture_freq = 6.0;   // sinusoid cycles across the long image axis
    double tint_r = 1.0, tint_g = 1.0, tint_b = 1.0;
    double noise_std = 0.02;
    std::uint64_t seed = 0;  // domain identity, mixed into per-sample streams
    int min_area = 9;

    void validate() const;
};

// Foreground/background intensity clamp windows; they guarantee the noiseless
// gray render is threshold-separable at 0.5.
constexpr double kBgLo = 0.08, kBgHi = 0.42;
constexpr double kFgLo = 0.58, kFgHi = 0.95;
constexpr double kTextureAmplitude = 0.06;

struct Sample {
    std::string id;
    std::string split;   // train / test / val
    std::string domain;  // free-form domain tag
    Image image;
    LabelMap labels;
};

/// Renders non-overlapping ellipses (eccentricity <= 2:1) on a textured
/// background. Labels match the rendered foreground exactly; noise is applied
/// after label extraction. Deterministic in (spec.seed, sample_seed).
Sample generate_sample(const DomainSpec& spec, std::uint64_t sample_seed);

/// Noiseless single-channel render used by the label self-consistency oracle.
Image generate_noiseless_gray(const DomainSpec& spec, std::uint64_t sample_seed);

struct SplitResult {
    std::vector<Sample> train, test;
};

/// Disjoint seed streams for the two sides; the test spec may shift radius
/// (scale shift) and/or intensity, tint, texture (style shift).
SplitResult make_split(const DomainSpec& spec_train, const DomainSpec& spec_test, int n_train,
                       int n_test, std::uint64_t seed);

// ---- dataset directory I/O ---------------------------------------------------
//
// Layout: images/<id>.png (8-bit, 1 or 3 channel), labels/<id>.png (16-bit
// single channel), manifest.csv with columns id,split,domain.

void save_dataset(const std::string& dir, const std::vector<Sample>& samples);

struct LoadReport {
    std::vector<std::string> warnings;
};

/// Empty or missing manifest in an existing directory loads as an empty
/// dataset. Non-contiguous label ids are relabeled 1..K with a warning.
std::vector<Sample> load_dataset(const std::string& dir, LoadReport* report = nullptr);

/// Loads a directory of 16-bit label PNGs (predicted label maps), keyed by id.
std::vector<std::pair<std::string, LabelMap>> load_labelmap_dir(const std::string& dir);

}  // namespace s3tta
