// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/generator.hpp"
#include "qgrl/rewards.hpp"

namespace qgrl {

struct BaselineConfig {
  double fluency = -10.0;
  double relevance = std::log(2.0);
  double answerability = std::log(2.0);

  void validate() const;
  nlohmann::json to_json() const;
  static BaselineConfig from_json(const nlohmann::json& j);
};

struct LossWeights {
  double coverage = 0.25;
  double fluency = 0.2;
  double relevance = 1.0;
  double answerability = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

struct RewardFlags {
  bool fluency = false;
  bool relevance = false;
  bool answerability = false;

  bool any() const { return fluency || relevance || answerability; }
  /// Letters from {F, R, A}, e.g. "FRA" or "" for none.
  static RewardFlags parse(std::string_view letters);
  std::string to_string() const;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double lr_decay = 0.5;
  std::size_t patience = 2;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 1;
  RewardFlags rewards;
  std::size_t samples_per_example = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// -(reward - baseline) * (1/T) sum_t log p_t
double rl_loss(const SampledSequence& sample, double reward, double baseline);
/// Differentiable form on a mean log-probability node.
nn::Var rl_loss(nn::Var mean_log_prob, double reward, double baseline);

/// L_base + sum over enabled rewards of gamma_k L_k; disabled terms add 0.
double joint_loss(double l_base, double l_flu, double l_rel, double l_ans, const LossWeights& w,
                  const RewardFlags& enabled = {true, true, true});

/// One optimisation step's record.
struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double l_base = 0.0;
  std::map<std::string, double> reward_mean;
  std::map<std::string, double> advantage_mean;
  std::map<std::string, std::size_t> reward_failures;
  double joint = 0.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;

  nlohmann::json to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double learning_rate = 0.0;
  bool improved = false;

  nlohmann::json to_json() const;
};

struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_dev_loss = 0.0;
  bool stopped_early = false;

  /// One JSON record per line: steps, then epochs, then a summary.
  void write(std::ostream& out) const;
  void write(const std::string& path) const;
};

struct TrainHooks {
  /// Called every `every` steps with the current parameters.
  std::size_t every = 0;
  std::function<void(std::size_t step, const Generator&)> periodic;
  /// Called after each epoch that improves the dev loss.
  std::function<void(std::size_t epoch, const Generator&)> on_best;
};

/// Teacher-forced MLE on the gold questions (L_base). Early stopping on dev
/// L_base restores the best parameters before returning.
TrainLog pretrain(Generator& generator, const Corpus& train, const Corpus& dev,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

struct RewardContext {
  RewardOracles oracles;
  RewardConfig reward;
  BaselineConfig baselines;
  LossWeights weights;
};

/// Per batch: L_base on the gold questions plus, for every enabled reward,
/// the policy-gradient loss of one sampled question per example, combined
/// by the loss weights. Early stopping on dev_joint_loss.
TrainLog finetune(Generator& generator, const Corpus& train, const Corpus& dev,
                  const RewardContext& context, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Dev selection score: mean of L_base + sum_k w_k * (b_k - R_k) over a
/// corpus, one sample per example drawn from a fixed seed.
double dev_joint_loss(const Generator& generator, const Corpus& dev, const RewardContext& context,
                      const RewardFlags& flags, std::uint64_t seed);

}  // namespace qgrl
