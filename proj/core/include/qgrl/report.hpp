// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qgrl/metrics.hpp"
#include "qgrl/rewards.hpp"

namespace qgrl {

/// Per-example reward scores of one output set, tagged with the oracles that
/// produced them.
struct ScoredOutputs {
  std::vector<RewardScores> scores;
  std::string oracle_fingerprint;
};

ScoredOutputs score_outputs(const TextSet& documents, const TextSet& hypotheses,
                            const RewardOracles& oracles, const RewardConfig& cfg = {});

struct RewardGain {
  std::optional<double> fluency;
  std::optional<double> relevance;
  std::optional<double> answerability;
};

/// Mean reward of `model` minus mean reward of `baseline`, per reward, over
/// the examples where that reward is defined. Throws when the two sets were
/// scored by different oracles or differ in size.
RewardGain reward_gain(const ScoredOutputs& model, const ScoredOutputs& baseline);

/// A system to report: its outputs aligned with the references and the
/// rewards it was fine-tuned with.
struct SystemOutputs {
  std::string name;
  bool fluency = false;
  bool relevance = false;
  bool answerability = false;
  TextSet hypotheses;
};

struct ReportOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 13;
  double significance = 0.01;
  RewardConfig reward;
};

/// Metric columns in Table 1 order.
inline constexpr std::array<const char*, 4> kMetricColumns = {"BLEU1", "BLEU4", "METEOR",
                                                              "ROUGE-L"};
inline constexpr std::array<const char*, 3> kRewardColumns = {"R-FLU", "R-REL", "R-ANS"};

struct ReportRow {
  std::string name;
  bool fluency = false;
  bool relevance = false;
  bool answerability = false;
  std::array<double, 4> metrics{};  // in [0, 1]
  std::array<std::optional<double>, 3> reward_deltas{};
  double length_ratio = 0.0;
  std::array<std::optional<double>, 4> metric_p{};
  std::array<std::optional<double>, 3> reward_p{};
  bool is_reference = false;
};

struct ReportTable {
  std::string reference;
  double significance = 0.01;
  std::vector<ReportRow> rows;

  /// Model, F, R, A, BLEU1, BLEU4, METEOR, ROUGE-L, R-FLU, R-REL, R-ANS;
  /// metrics scaled to 0-100, `*` marks p < significance.
  std::string to_tsv() const;
  /// The same table with aligned columns.
  std::string to_text() const;
  /// Length ratios and raw p-values per row.
  std::string details_tsv() const;
};

/// The first system is the reference the deltas and tests compare against.
/// METEOR is the exact-match variant.
ReportTable build_report(const TextSet& documents, const TextSet& references,
                         const std::vector<SystemOutputs>& systems, const RewardOracles& oracles,
                         const ReportOptions& options = {});

}  // namespace qgrl
