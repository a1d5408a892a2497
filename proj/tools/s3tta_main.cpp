#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "s3tta/commands.hpp"
#include "s3tta/config.hpp"

namespace {

// Exit codes: 0 success, 2 usage error, 3 config error, 4 missing artifact,
// 5 runtime failure.
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitMissing = 4;
constexpr int kExitRuntime = 5;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scale-style selective test-time augmentation for instance segmentation"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        void (*fn)(const std::string&);
    };
    const Sub subs[] = {
        {"gen-data", "generate a synthetic train/test dataset", s3tta::cmd_gen_data},
        {"pretrain-st", "pretrain the style-transfer network", s3tta::cmd_pretrain_st},
        {"train", "jointly train style-transfer decoder and segmentation net", s3tta::cmd_train},
        {"predict", "predict instance maps (baseline, aggregate_all, or s3tta)", s3tta::cmd_predict},
        {"evaluate", "score predictions against ground truth", s3tta::cmd_evaluate},
        {"ablate", "sweep the scale/style grid and report F1", s3tta::cmd_ablate},
        {"visualize-embedding", "project original and stylized images to 2D", s3tta::cmd_visualize_embedding},
    };

    std::string config_path;
    void (*selected)(const std::string&) = nullptr;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("-c,--config", config_path, "path to key-value config file")->required();
        sub->callback([&selected, &s]() { selected = s.fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (e.get_exit_code() == 0) return 0;  // --help
        if (argc <= 1) std::cerr << app.help();
        return kExitUsage;
    }

    try {
        selected(config_path);
        return 0;
    } catch (const s3tta::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const s3tta::MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
