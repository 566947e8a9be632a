// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qgrl/generator.hpp"
#include "qgrl/oracles.hpp"
#include "qgrl/rewards.hpp"
#include "qgrl/synthetic.hpp"
#include "qgrl/trainer.hpp"

namespace qgrl::cli {

std::string_view version();

/// Where inputs are read and outputs written. Empty file paths fall back to
/// the conventional layout under data_dir / out_dir.
struct Paths {
  std::string data_dir = "data";
  std::string out_dir = "run";
  std::string train;
  std::string dev;
  std::string test;
  std::string ratings;
  std::string checkpoints;
  std::string reports;

  std::string train_file() const;
  std::string dev_file() const;
  std::string test_file() const;
  std::string split_file(std::string_view split) const;
  std::string ratings_file() const;
  std::string checkpoint_dir() const;
  std::string report_dir() const;
  std::string log_dir() const;
  std::string negatives_dir() const;
  std::string outputs_dir() const;
  std::string analysis_dir() const;
};

struct DataConfig {
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  synthetic::Options synthetic;
  std::size_t vocab_max_size = 50000;
  std::size_t vocab_min_count = 1;
};

struct EvalConfig {
  std::string split = "test";
  std::vector<std::string> systems = {"B1", "F", "R", "A"};
  std::size_t resamples = 1000;
  double significance = 0.01;
  std::size_t raters = 3;
  std::string rated_system = "B1";
};

/// Everything a subcommand may read. Per-component seeds are derived from
/// the single `seed`, so one flag reproduces or varies a whole run.
struct RunConfig {
  std::uint64_t seed = 1;
  Paths paths;
  DataConfig data;
  GeneratorConfig generator;
  TrainConfig pretrain;
  TrainConfig finetune;
  std::string rewards = "FRA";
  RewardConfig reward;
  BaselineConfig baselines;
  LossWeights weights;
  OracleModelConfig oracle_model;
  OracleTrainConfig oracle_train;
  FocalParams focal;
  EvalConfig evaluate;

  std::uint64_t derived_seed(std::string_view component) const;
  /// Generator config with the coverage weight taken from `weights`.
  GeneratorConfig generator_config() const;
  TrainConfig pretrain_config() const;
  TrainConfig finetune_config() const;
  OracleTrainConfig oracle_train_config(std::string_view oracle) const;

  nlohmann::json to_json() const;
  /// Requires every key; unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
};

/// Dotted leaf keys of the default configuration, e.g. "pretrain.learning_rate".
std::vector<std::string> config_keys();

/// defaults < config file < overrides. Override values are parsed against
/// the type of the default at that key; lists are comma separated.
RunConfig resolve_config(const std::optional<std::string>& config_file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

/// Writes config.<tag>.json (resolved config plus code version) into `dir`.
void write_snapshot(const RunConfig& cfg, const std::string& dir, const std::string& tag);

}  // namespace qgrl::cli
