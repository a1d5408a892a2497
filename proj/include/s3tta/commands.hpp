#pragma once

#include <string>

namespace s3tta {

/// CLI entry points; each parses the config file, runs its pipeline under
/// <out_dir>/<command>/<run_id>/ and writes the resolved config there.
/// Errors surface as ConfigError / MissingArtifact / std::runtime_error.
void cmd_gen_data(const std::string& config_path);
void cmd_pretrain_st(const std::string& config_path);
void cmd_train(const std::string& config_path);
void cmd_predict(const std::string& config_path);
void cmd_evaluate(const std::string& config_path);
void cmd_ablate(const std::string& config_path);
void cmd_visualize_embedding(const std::string& config_path);

}  // namespace s3tta
