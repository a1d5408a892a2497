#include "s3tta/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "s3tta/pngio.hpp"
#include "s3tta/rng.hpp"

namespace fs = std::filesystem;

namespace s3tta {

void DomainSpec::validate() const {
    if (img_h < 1 || img_w < 1) throw std::invalid_argument("domain spec: image dims must be positive");
    if (channels != 1 && channels != 3) throw std::invalid_argument("domain spec: channels must be 1 or 3");
    if (!(radius_min > 0.0) || radius_max < radius_min)
        throw std::invalid_argument("domain spec: invalid radius range");
    if (count_min < 0 || count_max < count_min)
        throw std::invalid_argument("domain spec: invalid count range");
    if (noise_std < 0.0) throw std::invalid_argument("domain spec: negative noise std");
    if (texture_freq < 0.0) throw std::invalid_argument("domain spec: negative texture frequency");
}

namespace {

struct Ellipse {
    double cx, cy, a, b, theta;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / a;
        const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / b;
        return u * u + v * v <= 1.0;
    }
};

struct Scene {
    double bg_level;
    double tex_angle, tex_phase;
    std::vector<Ellipse> cells;
    std::vector<double> cell_values;
    LabelMap labels;
};

double texture_at(const DomainSpec& spec, const Scene& sc, int x, int y) {
    const double span = static_cast<double>(std::max(spec.img_h, spec.img_w));
    const double proj = x * std::cos(sc.tex_angle) + y * std::sin(sc.tex_angle);
    return kTextureAmplitude * std::sin(2.0 * M_PI * spec.texture_freq * proj / span + sc.tex_phase);
}

/// Places cells and fixes all per-sample draws. Noise is not drawn here so the
/// noiseless render shares the exact same scene.
Scene build_scene(const DomainSpec& spec, std::uint64_t sample_seed) {
    spec.validate();
    RandomGen rng(mix_seed(spec.seed, sample_seed));
    Scene sc;
    sc.bg_level = std::clamp(rng.normal(spec.bg_mean, spec.bg_std), kBgLo, kBgHi);
    sc.tex_angle = rng.uniform(0.0, M_PI);
    sc.tex_phase = rng.uniform(0.0, 2.0 * M_PI);
    sc.labels = LabelMap(spec.img_h, spec.img_w);

    const int want = rng.uniform_int(spec.count_min, spec.count_max);
    int placed = 0;
    for (int ci = 0; ci < want; ++ci) {
        bool ok = false;
        for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
            Ellipse e;
            e.a = rng.uniform(spec.radius_min, spec.radius_max);
            e.b = rng.uniform(std::max(spec.radius_min, e.a / 2.0), spec.radius_max);
            e.theta = rng.uniform(0.0, M_PI);
            const double margin = std::max(e.a, e.b) + 1.0;
            if (2.0 * margin >= spec.img_w - 1 || 2.0 * margin >= spec.img_h - 1) break;
            e.cx = rng.uniform(margin, spec.img_w - 1 - margin);
            e.cy = rng.uniform(margin, spec.img_h - 1 - margin);

            std::vector<std::pair<int, int>> px;
            bool overlap = false;
            const int y0 = static_cast<int>(std::floor(e.cy - margin));
            const int y1 = static_cast<int>(std::ceil(e.cy + margin));
            const int x0 = static_cast<int>(std::floor(e.cx - margin));
            const int x1 = static_cast<int>(std::ceil(e.cx + margin));
            for (int y = y0; y <= y1 && !overlap; ++y)
                for (int x = x0; x <= x1; ++x) {
                    if (!e.contains(x, y)) continue;
                    if (sc.labels.at(y, x) != 0) {
                        overlap = true;
                        break;
                    }
                    px.push_back({y, x});
                }
            if (overlap || static_cast<int>(px.size()) < spec.min_area) continue;
            ++placed;
            for (auto [y, x] : px) sc.labels.at(y, x) = placed;
            sc.cells.push_back(e);
            sc.cell_values.push_back(std::clamp(rng.normal(spec.fg_mean, spec.fg_std), kFgLo, kFgHi));
            ok = true;
        }
    }
    return sc;
}

double gray_at(const DomainSpec& spec, const Scene& sc, int x, int y) {
    const std::int32_t id = sc.labels.at(y, x);
    const double base = id == 0 ? sc.bg_level : sc.cell_values[id - 1];
    return base + (id == 0 ? texture_at(spec, sc, x, y) : 0.3 * texture_at(spec, sc, x, y));
}

}  // namespace

Image generate_noiseless_gray(const DomainSpec& spec, std::uint64_t sample_seed) {
    const Scene sc = build_scene(spec, sample_seed);
    Image img(spec.img_h, spec.img_w, 1);
    for (int y = 0; y < spec.img_h; ++y)
        for (int x = 0; x < spec.img_w; ++x)
            img.at(y, x, 0) = static_cast<float>(std::clamp(gray_at(spec, sc, x, y), 0.0, 1.0));
    return img;
}

Sample generate_sample(const DomainSpec& spec, std::uint64_t sample_seed) {
    const Scene sc = build_scene(spec, sample_seed);
    RandomGen noise_rng(mix_seed(mix_seed(spec.seed, sample_seed), 0x6e015eULL));
    Sample s;
    s.labels = sc.labels;
    s.image = Image(spec.img_h, spec.img_w, spec.channels);
    const double tint[3] = {spec.tint_r, spec.tint_g, spec.tint_b};
    for (int y = 0; y < spec.img_h; ++y)
        for (int x = 0; x < spec.img_w; ++x) {
            const double g = gray_at(spec, sc, x, y);
            for (int ch = 0; ch < spec.channels; ++ch) {
                double v = spec.channels == 1 ? g : g * tint[ch];
                if (spec.noise_std > 0.0) v += noise_rng.normal(0.0, spec.noise_std);
                s.image.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return s;
}

SplitResult make_split(const DomainSpec& spec_train, const DomainSpec& spec_test, int n_train,
                       int n_test, std::uint64_t seed) {
    SplitResult r;
    char buf[32];
    for (int i = 0; i < n_train; ++i) {
        Sample s = generate_sample(spec_train, mix_seed(seed, 0x7e000000ULL + i));
        std::snprintf(buf, sizeof(buf), "train_%04d", i);
        s.id = buf;
        s.split = "train";
        s.domain = "train";
        r.train.push_back(std::move(s));
    }
    for (int i = 0; i < n_test; ++i) {
        Sample s = generate_sample(spec_test, mix_seed(seed, 0x7e500000ULL + i));
        std::snprintf(buf, sizeof(buf), "test_%04d", i);
        s.id = buf;
        s.split = "test";
        s.domain = "test";
        r.test.push_back(std::move(s));
    }
    return r;
}

void save_dataset(const std::string& dir, const std::vector<Sample>& samples) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw std::runtime_error("dataset: cannot write manifest in " + dir);
    manifest << "id,split,domain\n";
    for (const auto& s : samples) {
        manifest << s.id << "," << s.split << "," << s.domain << "\n";
        write_image_png((fs::path(dir) / "images" / (s.id + ".png")).string(), s.image);
        write_label_png((fs::path(dir) / "labels" / (s.id + ".png")).string(), s.labels);
    }
}

std::vector<Sample> load_dataset(const std::string& dir, LoadReport* report) {
    if (!fs::exists(dir)) throw std::runtime_error("dataset: directory does not exist: " + dir);
    std::vector<Sample> out;
    const fs::path manifest_path = fs::path(dir) / "manifest.csv";
    if (!fs::exists(manifest_path)) return out;  // empty dataset

    std::ifstream manifest(manifest_path);
    std::string line;
    std::getline(manifest, line);  // header
    int lineno = 1;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Sample s;
        if (!std::getline(ss, s.id, ',') || s.id.empty())
            throw std::runtime_error("dataset: malformed manifest line " + std::to_string(lineno) +
                                     " in " + manifest_path.string());
        std::getline(ss, s.split, ',');
        std::getline(ss, s.domain, ',');
        s.image = read_image_png((fs::path(dir) / "images" / (s.id + ".png")).string());
        s.labels = read_label_png((fs::path(dir) / "labels" / (s.id + ".png")).string());
        if (s.image.h != s.labels.h || s.image.w != s.labels.w)
            throw std::runtime_error("dataset: image/label dims mismatch for id " + s.id);

        // ids must form a contiguous 1..K range (in any order)
        const std::int32_t max_id = s.labels.max_label();
        std::vector<char> present(static_cast<std::size_t>(max_id) + 1, 0);
        for (auto v : s.labels.v) {
            if (v < 0) throw std::runtime_error("dataset: negative label id in " + s.id);
            present[v] = 1;
        }
        bool contiguous = true;
        for (std::int32_t i = 1; i <= max_id; ++i) contiguous = contiguous && present[i];
        if (!contiguous) {
            const int k = relabel_contiguous(s.labels);
            if (report)
                report->warnings.push_back("labels for id " + s.id +
                                           " were not contiguous; relabeled 1.." + std::to_string(k));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::pair<std::string, LabelMap>> load_labelmap_dir(const std::string& dir) {
    if (!fs::exists(dir)) throw std::runtime_error("labelmap dir does not exist: " + dir);
    std::vector<std::pair<std::string, LabelMap>> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.emplace_back(f.stem().string(), read_label_png(f.string()));
    return out;
}

}  // namespace s3tta
