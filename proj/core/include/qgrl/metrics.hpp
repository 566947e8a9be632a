// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qgrl/corpus.hpp"

namespace qgrl {

using TextSet = std::vector<TokenSeq>;

inline constexpr double kBleuSmoothing = 1e-9;

/// Additive per-example counts for corpus BLEU: clipped matches and totals
/// for n = 1..max_n, then hypothesis and reference lengths.
std::vector<double> bleu_stats(const TokenSeq& hypothesis, const TokenSeq& reference, int max_n);
/// Corpus BLEU from summed stats. Orders with no matches (or no n-grams)
/// get precision kBleuSmoothing. Brevity penalty exp(1 - r/c) when c <= r.
double bleu_from_stats(const std::vector<double>& stats, int max_n);
double bleu(const TextSet& hypotheses, const TextSet& references, int max_n = 4);

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);
/// LCS F1 of one pair; 0 when either side is empty.
double rouge_l_pair(const TokenSeq& hypothesis, const TokenSeq& reference);
/// Mean of the per-pair scores.
double rouge_l(const TextSet& hypotheses, const TextSet& references);

/// Exact-match unigram alignment with the most matches and, among those, the
/// fewest chunks. A chunk is a run of matches adjacent in both strings.
struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
MeteorAlignment meteor_align(const TokenSeq& hypothesis, const TokenSeq& reference);

struct MeteorParams {
  double alpha = 0.9;  // Fmean = P R / (alpha P + (1 - alpha) R)
  double beta = 3.0;
  double gamma = 0.5;
};
/// Fmean * (1 - gamma * frag^beta) with frag = (chunks - 1) / (matches - 1)
/// (0 for a single match), so a perfect match scores exactly 1.
double meteor_from_alignment(const MeteorAlignment& a, std::size_t hyp_len, std::size_t ref_len,
                             const MeteorParams& params = {});
double meteor_exact_pair(const TokenSeq& hypothesis, const TokenSeq& reference,
                         const MeteorParams& params = {});
/// Mean of the per-pair scores.
double meteor_exact(const TextSet& hypotheses, const TextSet& references,
                    const MeteorParams& params = {});

/// mean |hyp| / mean |ref|
double length_ratio(const TextSet& hypotheses, const TextSet& references);

/// A corpus metric that is a function of summed per-example statistics.
struct DecomposableMetric {
  std::string name;
  std::function<std::vector<double>(const TokenSeq& hyp, const TokenSeq& ref)> stats;
  std::function<double(const std::vector<double>& summed)> aggregate;

  double operator()(const TextSet& hypotheses, const TextSet& references) const;
};

DecomposableMetric bleu_metric(int max_n);
DecomposableMetric rouge_l_metric();
DecomposableMetric meteor_metric();

/// Per-example statistic rows and how to aggregate their sum.
using Aggregate = std::function<double(const std::vector<double>&)>;

/// Resamples example indices with replacement; returns the fraction of
/// resamples whose difference agg(A*) - agg(B*) is zero or has the opposite
/// sign to the full-set difference (every resample counts when that is 0).
double paired_bootstrap(const std::vector<std::vector<double>>& stats_a,
                        const std::vector<std::vector<double>>& stats_b, const Aggregate& aggregate,
                        std::size_t resamples, std::uint64_t seed);
double paired_bootstrap(const TextSet& outputs_a, const TextSet& outputs_b,
                        const TextSet& references, const DecomposableMetric& metric,
                        std::size_t resamples, std::uint64_t seed);
/// Mean of per-example values.
double paired_bootstrap_mean(const std::vector<double>& values_a,
                             const std::vector<double>& values_b, std::size_t resamples,
                             std::uint64_t seed);

}  // namespace qgrl
