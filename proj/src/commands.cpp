#include "s3tta/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "s3tta/config.hpp"
#include "s3tta/evalkit.hpp"
#include "s3tta/pngio.hpp"
#include "s3tta/trainer.hpp"

namespace fs = std::filesystem;

namespace s3tta {

namespace {

std::string make_run_dir(KVConfig& cfg, const std::string& command) {
    const std::string out_dir = cfg.get_string("out_dir", "out");
    const std::string run_id = cfg.get_string("run_id", "run" + std::to_string(cfg.get_int("seed", 42)));
    const fs::path dir = fs::path(out_dir) / command / run_id;
    fs::create_directories(dir);
    return dir.string();
}

void finalize(KVConfig& cfg, const std::string& run_dir) {
    cfg.reject_unknown_keys();
    cfg.write_resolved((fs::path(run_dir) / "resolved_config.txt").string());
}

DomainSpec read_domain_spec(KVConfig& cfg, const std::string& prefix, const DomainSpec& base) {
    DomainSpec s = base;
    s.radius_min = cfg.get_double(prefix + ".radius_min", s.radius_min);
    s.radius_max = cfg.get_double(prefix + ".radius_max", s.radius_max);
    s.count_min = static_cast<int>(cfg.get_int(prefix + ".count_min", s.count_min));
    s.count_max = static_cast<int>(cfg.get_int(prefix + ".count_max", s.count_max));
    s.fg_mean = cfg.get_double(prefix + ".fg_mean", s.fg_mean);
    s.fg_std = cfg.get_double(prefix + ".fg_std", s.fg_std);
    s.bg_mean = cfg.get_double(prefix + ".bg_mean", s.bg_mean);
    s.bg_std = cfg.get_double(prefix + ".bg_std", s.bg_std);
    s.texture_freq = cfg.get_double(prefix + ".texture_freq", s.texture_freq);
    s.tint_r = cfg.get_double(prefix + ".tint_r", s.tint_r);
    s.tint_g = cfg.get_double(prefix + ".tint_g", s.tint_g);
    s.tint_b = cfg.get_double(prefix + ".tint_b", s.tint_b);
    s.noise_std = cfg.get_double(prefix + ".noise_std", s.noise_std);
    s.validate();
    return s;
}

std::vector<RotationAngle> read_angles(KVConfig& cfg) {
    const auto raw = cfg.get_int_list("policy.angles", {0, 1, 2, 3});
    std::vector<RotationAngle> angles;
    for (int k : raw) angles.emplace_back(k);
    if (angles.empty() || angles.front().quarter_turns != 0)
        throw ConfigError("policy.angles must be a non-empty list starting with 0");
    return angles;
}

S3ttaConfig read_policy(KVConfig& cfg) {
    S3ttaConfig pc;
    pc.scales = cfg.get_double_list("policy.scales", {0.7, 1.0, 1.5, 2.0});
    if (pc.scales.empty()) throw ConfigError("policy.scales must be non-empty");
    pc.angles = read_angles(cfg);
    pc.include_identity = cfg.get_bool("policy.include_identity", true);
    pc.min_area = static_cast<int>(cfg.get_int("min_area", 9));
    return pc;
}

std::string require_file(KVConfig& cfg, const std::string& key) {
    const std::string path = cfg.require_string(key);
    if (!fs::exists(path)) throw MissingArtifact(key + " not found: " + path);
    return path;
}

std::string require_dir(KVConfig& cfg, const std::string& key) {
    const std::string path = cfg.require_string(key);
    if (!fs::is_directory(path)) throw MissingArtifact(key + " not found: " + path);
    return path;
}

std::vector<Sample> load_data(const std::string& dir) {
    LoadReport report;
    auto samples = load_dataset(dir, &report);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return samples;
}

}  // namespace

void cmd_gen_data(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "gen-data");
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));

    DomainSpec base;
    base.img_h = base.img_w = static_cast<int>(cfg.get_int("img_size", 64));
    base.channels = static_cast<int>(cfg.get_int("channels", 3));
    base.min_area = static_cast<int>(cfg.get_int("min_area", 9));
    base.seed = seed;
    const DomainSpec train_spec = read_domain_spec(cfg, "train", base);
    const DomainSpec test_spec = read_domain_spec(cfg, "test", train_spec);
    const int n_train = static_cast<int>(cfg.get_int("n_train", 32));
    const int n_test = static_cast<int>(cfg.get_int("n_test", 16));
    const int n_val = static_cast<int>(cfg.get_int("n_val", 0));
    finalize(cfg, run_dir);

    SplitResult split = make_split(train_spec, test_spec, n_train, n_test, seed);
    save_dataset((fs::path(run_dir) / "train").string(), split.train);
    save_dataset((fs::path(run_dir) / "test").string(), split.test);
    if (n_val > 0) {
        std::vector<Sample> val;
        char buf[32];
        for (int i = 0; i < n_val; ++i) {
            Sample s = generate_sample(train_spec, mix_seed(seed, 0x7a100000ULL + i));
            std::snprintf(buf, sizeof(buf), "val_%04d", i);
            s.id = buf;
            s.split = "val";
            s.domain = "train";
            val.push_back(std::move(s));
        }
        save_dataset((fs::path(run_dir) / "val").string(), val);
    }
    std::cout << "gen-data: wrote " << split.train.size() << " train / " << split.test.size()
              << " test images under " << run_dir << "\n";
}

void cmd_pretrain_st(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "pretrain-st");
    const std::string data_dir = require_dir(cfg, "data_dir");

    TrainConfig tc;
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
    tc.lr_pretrain = cfg.get_double("pretrain.lr", 1e-3);
    tc.encoder_lr_scale = cfg.get_double("pretrain.encoder_lr_scale", 0.1);
    tc.batch_size = static_cast<int>(cfg.get_int("pretrain.batch", 4));
    tc.pretrain_steps = static_cast<int>(cfg.get_int("pretrain.steps", 500));
    tc.weights.w_c = cfg.get_double("loss.w_c", 1.0);
    tc.weights.w_s = cfg.get_double("loss.w_s", 2.0);
    const auto widths = cfg.get_int_list("st.widths", {16, 32, 64, 128});
    const int channels = static_cast<int>(cfg.get_int("channels", 3));
    finalize(cfg, run_dir);

    const auto data = load_data(data_dir);
    StyleTransferF st = StyleTransferF::make(channels, widths, mix_seed(tc.seed, 0x57));
    PretrainResult result = pretrain_style(data, tc, st);
    save_style_checkpoint((fs::path(run_dir) / "st_pretrained.ckpt").string(), st);
    write_pretrain_log((fs::path(run_dir) / "pretrain_log.csv").string(), result);
    std::cout << "pretrain-st: weighted loss " << result.history.front().weighted << " -> "
              << result.history.back().weighted << " over " << tc.pretrain_steps << " steps\n";
}

void cmd_train(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "train");
    const std::string data_dir = require_dir(cfg, "data_dir");
    const std::string st_path = require_file(cfg, "st_checkpoint");

    TrainConfig tc;
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
    tc.lr_joint = cfg.get_double("joint.lr", 5e-4);
    tc.joint_steps = static_cast<int>(cfg.get_int("joint.steps", 2000));
    tc.weights.w_c = cfg.get_double("loss.w_c", 1.0);
    tc.weights.w_s = cfg.get_double("loss.w_s", 2.0);
    tc.weights.w_seg = cfg.get_double("loss.w_seg", 5.0);
    tc.scales = cfg.get_double_list("policy.scales", {0.7, 1.0, 1.5, 2.0});
    tc.angles = read_angles(cfg);
    tc.include_identity = cfg.get_bool("policy.include_identity", true);
    tc.min_area = static_cast<int>(cfg.get_int("min_area", 9));
    const int n_styles = static_cast<int>(cfg.get_int("policy.n_styles", 3));
    const std::string sel = cfg.get_string("policy.style_selection", "fps");
    if (sel != "fps" && sel != "random")
        throw ConfigError("policy.style_selection must be fps or random");
    const int seg_base = static_cast<int>(cfg.get_int("seg.base", 16));
    finalize(cfg, run_dir);

    const auto data = load_data(data_dir);
    if (data.empty()) throw MissingArtifact("training dataset is empty: " + data_dir);
    StyleTransferF st = load_style_checkpoint(st_path);

    std::vector<Image> pool;
    std::vector<std::string> ids;
    for (const auto& s : data) {
        pool.push_back(s.image);
        ids.push_back(s.id);
    }
    StyleBank bank = build_style_bank(pool, ids, st, n_styles,
                                      sel == "fps" ? StyleSelection::kFarthestPoint
                                                   : StyleSelection::kRandom,
                                      tc.seed);
    save_style_bank((fs::path(run_dir) / "bank").string(), bank);

    UNetF seg(data[0].image.c, seg_base);
    RandomGen seg_rng(mix_seed(tc.seed, 0x5e6));
    seg.init(seg_rng);

    JointResult result = joint_train(data, bank, tc, st, seg);
    save_style_checkpoint((fs::path(run_dir) / "st_joint.ckpt").string(), st);
    save_seg_checkpoint((fs::path(run_dir) / "seg.ckpt").string(), seg);
    write_joint_log((fs::path(run_dir) / "train_log.csv").string(), result);

    if (result.encoder_hash_before != result.encoder_hash_after)
        throw std::runtime_error("encoder freeze violated during joint training");
    std::cout << "train: " << tc.joint_steps << " steps, final total loss "
              << result.history.back().l_total << ", encoder hash stable\n";
}

void cmd_predict(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "predict");
    const std::string data_dir = require_dir(cfg, "data_dir");
    const std::string method = cfg.get_string("method", "s3tta");
    if (method != "baseline" && method != "aggregate_all" && method != "s3tta")
        throw ConfigError("method must be baseline, aggregate_all, or s3tta");
    const std::string seg_path = require_file(cfg, "seg_checkpoint");
    S3ttaConfig pc = read_policy(cfg);

    StyleTransferF st;
    StyleBank bank;
    if (method != "baseline") {
        st = load_style_checkpoint(require_file(cfg, "st_checkpoint"));
        bank = load_style_bank(require_dir(cfg, "bank_dir"));
    }
    finalize(cfg, run_dir);

    const UNetF seg = load_seg_checkpoint(seg_path);
    const auto data = load_data(data_dir);
    const fs::path preds = fs::path(run_dir) / "preds";
    fs::create_directories(preds);

    std::ofstream scores;
    if (method == "s3tta") {
        scores.open(fs::path(run_dir) / "selector_scores.csv");
        scores << "image_id,scale,style_id,mae,selected_flag\n";
    }

    for (const auto& s : data) {
        LabelMap pred;
        if (method == "baseline") {
            pred = predict_plain(seg, s.image, pc.min_area);
        } else if (method == "aggregate_all") {
            pred = baseline_aggregate_all(seg, st, bank, s.image, pc);
        } else {
            S3ttaPrediction r = predict_s3tta(seg, st, bank, s.image, pc);
            pred = std::move(r.labels);
            char buf[128];
            for (const auto& sc : r.scores) {
                std::snprintf(buf, sizeof(buf), "%s,%g,%d,%.8f,%d\n", s.id.c_str(), sc.policy.scale,
                              sc.policy.style_index, sc.mae, sc.policy == r.winner ? 1 : 0);
                scores << buf;
            }
        }
        write_label_png((preds / (s.id + ".png")).string(), pred);
    }
    std::cout << "predict: method " << method << ", " << data.size() << " images -> " << preds
              << "\n";
}

void cmd_evaluate(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "evaluate");
    const std::string data_dir = require_dir(cfg, "data_dir");
    const std::string pred_dir = require_dir(cfg, "pred_dir");
    const std::string method = cfg.get_string("method", "s3tta");
    const auto taus = cfg.get_double_list("taus", {0.5, 0.6, 0.7});
    finalize(cfg, run_dir);

    const auto data = load_data(data_dir);
    const auto preds = load_labelmap_dir(pred_dir);
    std::vector<MetricsRow> rows;
    for (const auto& s : data) {
        const LabelMap* pred = nullptr;
        for (const auto& [id, lab] : preds)
            if (id == s.id) pred = &lab;
        if (!pred) throw MissingArtifact("prediction missing for image id " + s.id);
        const auto [dice, jac] = dice_jaccard(*pred, s.labels);
        for (double tau : taus)
            rows.push_back({s.id, method, tau, f1_at(*pred, s.labels, tau), dice, jac});
    }
    const std::string out = (fs::path(run_dir) / "metrics.csv").string();
    write_metrics_csv(out, rows);
    std::cout << "evaluate: wrote " << rows.size() << " rows to " << out << "\n";
}

void cmd_ablate(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "ablate");
    const std::string data_dir = require_dir(cfg, "data_dir");
    const std::string st_path = require_file(cfg, "st_checkpoint");
    const std::string seg_path = require_file(cfg, "seg_checkpoint");
    const std::string bank_dir = require_dir(cfg, "bank_dir");
    const auto angles = read_angles(cfg);
    const int min_area = static_cast<int>(cfg.get_int("min_area", 9));
    const double tau = cfg.get_double("tau", 0.5);
    finalize(cfg, run_dir);

    const StyleTransferF st = load_style_checkpoint(st_path);
    const UNetF seg = load_seg_checkpoint(seg_path);
    const StyleBank bank_full = load_style_bank(bank_dir);
    const auto data = load_data(data_dir);

    const std::vector<std::vector<double>> scale_sets = {
        {1.0}, {1.0, 2.0}, {1.0, 1.5, 2.0}, {0.7, 1.0, 1.5, 2.0}};
    const std::vector<int> style_counts = {1, 3};

    const std::string out = (fs::path(run_dir) / "ablation.csv").string();
    std::ofstream csv(out);
    csv << "n_styles,scales,f1_at_tau\n";
    for (int ns : style_counts) {
        if (ns > bank_full.size())
            throw MissingArtifact("ablate: style bank has fewer than " + std::to_string(ns) +
                                  " styles");
        StyleBank bank;
        bank.ids.assign(bank_full.ids.begin(), bank_full.ids.begin() + ns);
        bank.images.assign(bank_full.images.begin(), bank_full.images.begin() + ns);
        for (const auto& scales : scale_sets) {
            S3ttaConfig pc;
            pc.scales = scales;
            pc.angles = angles;
            pc.include_identity = false;
            pc.min_area = min_area;
            double f1_sum = 0.0;
            for (const auto& s : data)
                f1_sum += f1_at(predict_s3tta(seg, st, bank, s.image, pc).labels, s.labels, tau);
            std::string scale_str;
            for (std::size_t i = 0; i < scales.size(); ++i) {
                char b[16];
                std::snprintf(b, sizeof(b), "%g", scales[i]);
                scale_str += std::string(i ? " " : "") + b;
            }
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%d,%s,%.1f\n", ns, scale_str.c_str(),
                          100.0 * f1_sum / static_cast<double>(data.size()));
            csv << buf;
        }
    }
    std::cout << "ablate: wrote " << (scale_sets.size() * style_counts.size()) << " rows to " << out
              << "\n";
}

void cmd_visualize_embedding(const std::string& config_path) {
    KVConfig cfg = KVConfig::from_file(config_path);
    const std::string run_dir = make_run_dir(cfg, "visualize-embedding");
    const std::string data_dir = require_dir(cfg, "data_dir");
    const std::string st_path = require_file(cfg, "st_checkpoint");
    const std::string bank_dir = require_dir(cfg, "bank_dir");
    const bool emit_scatter = cfg.get_bool("emit_scatter", true);
    finalize(cfg, run_dir);

    const StyleTransferF st = load_style_checkpoint(st_path);
    const StyleBank bank = load_style_bank(bank_dir);
    if (bank.size() < 1) throw MissingArtifact("visualize-embedding: empty style bank");
    const auto data = load_data(data_dir);

    std::vector<Image> all;
    for (const auto& s : data) all.push_back(s.image);
    const Tensor style_deep = st.encode(bank.images[0]).phi.back();
    for (const auto& s : data) all.push_back(st.stylize_pre(s.image, style_deep).stylized);

    const auto pts = embed_project(all, st);
    const std::size_t n = data.size();

    const std::string out = (fs::path(run_dir) / "embedding.csv").string();
    std::ofstream csv(out);
    csv << "image_id,set,x,y\n";
    char buf[160];
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f\n", data[i % n].id.c_str(),
                      i < n ? "original" : "stylized", pts[i].first, pts[i].second);
        csv << buf;
    }

    std::vector<std::pair<double, double>> orig(pts.begin(), pts.begin() + n);
    std::vector<std::pair<double, double>> styl(pts.begin() + n, pts.end());
    std::cout << "visualize-embedding: mean pairwise distance original "
              << mean_pairwise_distance(orig) << ", stylized " << mean_pairwise_distance(styl)
              << "\n";

    if (emit_scatter) {
        // simple scatter raster: originals blue-ish, stylized orange
        const int sz = 360, margin = 16;
        Image canvas(sz, sz, 3);
        for (auto& v : canvas.px) v = 1.0f;
        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (const auto& p : pts) {
            lo_x = std::min(lo_x, p.first);
            hi_x = std::max(hi_x, p.first);
            lo_y = std::min(lo_y, p.second);
            hi_y = std::max(hi_y, p.second);
        }
        const double sx = hi_x > lo_x ? (sz - 2 * margin) / (hi_x - lo_x) : 0.0;
        const double sy = hi_y > lo_y ? (sz - 2 * margin) / (hi_y - lo_y) : 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const int x = margin + static_cast<int>((pts[i].first - lo_x) * sx);
            const int y = margin + static_cast<int>((pts[i].second - lo_y) * sy);
            const bool orig_set = i < n;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = std::clamp(y + dy, 0, sz - 1);
                    const int xx = std::clamp(x + dx, 0, sz - 1);
                    canvas.at(yy, xx, 0) = orig_set ? 0.15f : 0.95f;
                    canvas.at(yy, xx, 1) = orig_set ? 0.35f : 0.55f;
                    canvas.at(yy, xx, 2) = orig_set ? 0.9f : 0.1f;
                }
        }
        write_image_png((fs::path(run_dir) / "scatter.png").string(), canvas);
    }
}

}  // namespace s3tta
