#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "s3tta/evalkit.hpp"
#include "s3tta/synthdata.hpp"
#include "test_util.hpp"

namespace {

int run_cli(const std::string& args, const std::string& log_path) {
    const std::string cmd = std::string(S3TTA_CLI_PATH) + " " + args + " >" + log_path + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage and config errors map to distinct exit codes") {
    testutil::TempDir tmp("clierr");
    const std::string log = tmp.sub("log.txt");

    CHECK(run_cli("", log) == 2);  // no arguments -> usage
    CHECK(slurp(log).find("Usage") != std::string::npos);
    CHECK(run_cli("frobnicate -c x", log) == 2);        // unknown command
    CHECK(run_cli("gen-data", log) == 2);               // missing required option
    CHECK(run_cli("--help", log) == 0);                 // help is not an error

    CHECK(run_cli("gen-data -c " + tmp.sub("absent.cfg"), log) == 4);  // missing config file

    write_file(tmp.sub("bad.cfg"), "seed = 1\ntypo_key = 3\nout_dir = " + tmp.sub("out") + "\n");
    CHECK(run_cli("gen-data -c " + tmp.sub("bad.cfg"), log) == 3);  // unknown key
    CHECK(slurp(log).find("typo_key") != std::string::npos);

    write_file(tmp.sub("missing_ckpt.cfg"),
               "seed = 1\nout_dir = " + tmp.sub("out") + "\ndata_dir = " + tmp.sub("nope") +
                   "\nst_checkpoint = " + tmp.sub("nope.ckpt") + "\n");
    CHECK(run_cli("train -c " + tmp.sub("missing_ckpt.cfg"), log) == 4);  // missing artifact
}

TEST_CASE("end-to-end pipeline on a miniature dataset") {
    testutil::TempDir tmp("clipipe");
    const std::string log = tmp.sub("log.txt");
    const std::string out = tmp.sub("out");

    // 1. generate data
    write_file(tmp.sub("gen.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "img_size = 32\n"
               "n_train = 6\n"
               "n_test = 3\n"
               "train.radius_min = 4\ntrain.radius_max = 6\n"
               "train.count_min = 1\ntrain.count_max = 3\n"
               "test.radius_min = 4\ntest.radius_max = 6\n");
    REQUIRE(run_cli("gen-data -c " + tmp.sub("gen.cfg"), log) == 0);
    const std::string data_root = out + "/gen-data/mini";
    CHECK(std::filesystem::exists(data_root + "/train/manifest.csv"));
    CHECK(std::filesystem::exists(data_root + "/train/resolved_config.txt") == false);
    CHECK(std::filesystem::exists(data_root + "/resolved_config.txt"));

    // 2. pretrain the style network briefly
    write_file(tmp.sub("pre.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/train\n"
               "st.widths = 8, 16\n"
               "pretrain.steps = 10\n"
               "pretrain.batch = 2\n");
    REQUIRE(run_cli("pretrain-st -c " + tmp.sub("pre.cfg"), log) == 0);
    const std::string st_ckpt = out + "/pretrain-st/mini/st_pretrained.ckpt";
    REQUIRE(std::filesystem::exists(st_ckpt));

    // 3. joint training, few steps
    write_file(tmp.sub("train.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/train\n"
               "st_checkpoint = " + st_ckpt + "\n"
               "policy.scales = 1\n"
               "policy.n_styles = 3\n"
               "policy.angles = 0, 2\n"
               "joint.steps = 8\n"
               "seg.base = 8\n");
    REQUIRE(run_cli("train -c " + tmp.sub("train.cfg"), log) == 0);
    const std::string seg_ckpt = out + "/train/mini/seg.ckpt";
    const std::string bank_dir = out + "/train/mini/bank";
    REQUIRE(std::filesystem::exists(seg_ckpt));
    REQUIRE(std::filesystem::exists(bank_dir + "/manifest.csv"));
    CHECK(std::filesystem::exists(out + "/train/mini/train_log.csv"));

    // 4. predict with the s3tta selector
    write_file(tmp.sub("pred.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/test\n"
               "method = s3tta\n"
               "seg_checkpoint = " + seg_ckpt + "\n"
               "st_checkpoint = " + st_ckpt + "\n"
               "bank_dir = " + bank_dir + "\n"
               "policy.scales = 1, 2\n"
               "policy.angles = 0, 2\n");
    REQUIRE(run_cli("predict -c " + tmp.sub("pred.cfg"), log) == 0);
    const std::string pred_dir = out + "/predict/mini/preds";
    REQUIRE(std::filesystem::exists(pred_dir + "/test_0000.png"));
    const std::string scores = slurp(out + "/predict/mini/selector_scores.csv");
    CHECK(scores.find("image_id,scale,style_id,mae,selected_flag") == 0);

    // 5. evaluate ground truth against itself: all scores 100.0
    std::filesystem::create_directories(tmp.sub("gt_preds"));
    for (const auto& e : std::filesystem::directory_iterator(data_root + "/test/labels"))
        std::filesystem::copy(e.path(), tmp.sub("gt_preds") + "/" + e.path().filename().string());
    write_file(tmp.sub("eval.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/test\n"
               "pred_dir = " + tmp.sub("gt_preds") + "\n"
               "method = baseline\n");
    REQUIRE(run_cli("evaluate -c " + tmp.sub("eval.cfg"), log) == 0);
    const std::string metrics = slurp(out + "/evaluate/mini/metrics.csv");
    CHECK(metrics.find("test_0000,baseline,0.5,100.0,100.0,100.0") != std::string::npos);
    CHECK(metrics.find("mean,baseline,0.7,100.0,100.0,100.0") != std::string::npos);

    // 6. ablation grid has the full 2x4 shape
    write_file(tmp.sub("ablate.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/test\n"
               "st_checkpoint = " + st_ckpt + "\n"
               "seg_checkpoint = " + seg_ckpt + "\n"
               "bank_dir = " + bank_dir + "\n"
               "policy.angles = 0, 2\n");
    REQUIRE(run_cli("ablate -c " + tmp.sub("ablate.cfg"), log) == 0);
    std::istringstream ablation(slurp(out + "/ablate/mini/ablation.csv"));
    std::string line;
    std::getline(ablation, line);
    CHECK(line == "n_styles,scales,f1_at_tau");
    int rows = 0;
    int rows_with_4_scales = 0;
    while (std::getline(ablation, line)) {
        if (line.empty()) continue;
        ++rows;
        if (line.find("0.7 1 1.5 2") != std::string::npos) ++rows_with_4_scales;
    }
    CHECK(rows == 8);
    CHECK(rows_with_4_scales == 2);

    // 7. embedding visualization
    write_file(tmp.sub("embed.cfg"),
               "seed = 5\n"
               "out_dir = " + out + "\n"
               "run_id = mini\n"
               "data_dir = " + data_root + "/test\n"
               "st_checkpoint = " + st_ckpt + "\n"
               "bank_dir = " + bank_dir + "\n");
    REQUIRE(run_cli("visualize-embedding -c " + tmp.sub("embed.cfg"), log) == 0);
    const std::string embedding = slurp(out + "/visualize-embedding/mini/embedding.csv");
    CHECK(embedding.find("image_id,set,x,y") == 0);
    CHECK(embedding.find("original") != std::string::npos);
    CHECK(embedding.find("stylized") != std::string::npos);
    CHECK(std::filesystem::exists(out + "/visualize-embedding/mini/scatter.png"));

    // reruns with the same config produce identical outputs
    const std::string metrics_before = slurp(out + "/evaluate/mini/metrics.csv");
    REQUIRE(run_cli("evaluate -c " + tmp.sub("eval.cfg"), log) == 0);
    CHECK(slurp(out + "/evaluate/mini/metrics.csv") == metrics_before);
}

TEST_SUITE_END();
