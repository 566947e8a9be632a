// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "qgrl_cli/run_config.hpp"

namespace qgrl::cli {

/// Each command validates its inputs before doing any work, writes its
/// artifacts plus a config snapshot, and returns a one-line summary.
nlohmann::json cmd_synthesize(const RunConfig& cfg);
nlohmann::json cmd_train_lm(const RunConfig& cfg);
nlohmann::json cmd_make_negatives(const RunConfig& cfg);
nlohmann::json cmd_train_disc(const RunConfig& cfg);
nlohmann::json cmd_train_qa(const RunConfig& cfg);
nlohmann::json cmd_pretrain(const RunConfig& cfg, const std::string& name);
nlohmann::json cmd_finetune(const RunConfig& cfg, const std::string& name, const std::string& from);
nlohmann::json cmd_generate(const RunConfig& cfg, const std::string& model, const std::string& split);
nlohmann::json cmd_evaluate(const RunConfig& cfg);
nlohmann::json cmd_simulate_ratings(const RunConfig& cfg, const std::string& model);
nlohmann::json cmd_analyze(const RunConfig& cfg, const std::string& model);

/// Generated questions as written by `generate`.
struct OutputFile {
  nlohmann::json decode;
  std::vector<std::string> ids;
  std::vector<TokenSeq> questions;
};
OutputFile read_outputs(const std::string& path);
std::string outputs_path(const RunConfig& cfg, const std::string& model, const std::string& split);
std::string generator_path(const RunConfig& cfg, const std::string& name);

}  // namespace qgrl::cli
