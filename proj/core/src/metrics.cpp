// SPDX-License-Identifier: Apache-2.0
#include "qgrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "qgrl/error.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

namespace {

void check_sets(const TextSet& hyps, const TextSet& refs, const char* what) {
  if (hyps.size() != refs.size())
    throw InvalidArgument(std::string(what) + ": hypothesis and reference counts differ");
  if (refs.empty()) throw InvalidArgument(std::string(what) + ": no references");
}

std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

std::vector<double> bleu_stats(const TokenSeq& hyp, const TokenSeq& ref, int max_n) {
  if (max_n < 1) throw InvalidArgument("bleu: max_n must be >= 1");
  const auto n_max = static_cast<std::size_t>(max_n);
  std::vector<double> stats(2 * n_max + 2, 0.0);
  for (std::size_t n = 1; n <= n_max; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    double matched = 0.0, total = 0.0;
    for (const auto& [gram, c] : h) {
      total += static_cast<double>(c);
      auto it = r.find(gram);
      if (it != r.end()) matched += static_cast<double>(std::min(c, it->second));
    }
    stats[n - 1] = matched;
    stats[n_max + n - 1] = total;
  }
  stats[2 * n_max] = static_cast<double>(hyp.size());
  stats[2 * n_max + 1] = static_cast<double>(ref.size());
  return stats;
}

double bleu_from_stats(const std::vector<double>& stats, int max_n) {
  const auto n_max = static_cast<std::size_t>(max_n);
  if (stats.size() != 2 * n_max + 2) throw InvalidArgument("bleu: malformed statistics");
  const double c = stats[2 * n_max];
  const double r = stats[2 * n_max + 1];
  if (c == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < n_max; ++n) {
    const double m = stats[n];
    const double t = stats[n_max + n];
    const double p = (m > 0.0 && t > 0.0) ? m / t : kBleuSmoothing;
    log_sum += std::log(p);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(n_max));
}

double bleu(const TextSet& hyps, const TextSet& refs, int max_n) {
  return bleu_metric(max_n)(hyps, refs);
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(const TokenSeq& hyp, const TokenSeq& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(hyp, ref));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(hyp.size());
  const double r = l / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(const TextSet& hyps, const TextSet& refs) { return rouge_l_metric()(hyps, refs); }

namespace {

// Depth-first search over hypothesis positions. Each position either takes
// an unused reference position of the same token or stays unmatched, subject
// to every token type reaching its maximum match count min(#hyp, #ref).
class Aligner {
 public:
  Aligner(const TokenSeq& hyp, const TokenSeq& ref) : hyp_(hyp) {
    std::unordered_map<std::string, std::size_t> ref_count;
    for (std::size_t j = 0; j < ref.size(); ++j) ref_positions_[ref[j]].push_back(j);
    for (const auto& [tok, pos] : ref_positions_) ref_count[tok] = pos.size();
    std::unordered_map<std::string, std::size_t> hyp_count;
    for (const auto& t : hyp) ++hyp_count[t];
    for (const auto& [tok, n] : hyp_count) {
      auto it = ref_count.find(tok);
      const std::size_t quota = it == ref_count.end() ? 0 : std::min(n, it->second);
      quota_[tok] = quota;
      matches_ += quota;
    }
    // Occurrences of each token at or after position i, for feasibility.
    remaining_.assign(hyp.size() + 1, 0);
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = hyp.size(); i-- > 0;) remaining_[i] = ++seen[hyp[i]];
    used_.assign(ref.size(), false);
  }

  MeteorAlignment run() {
    if (matches_ == 0) return {};
    std::unordered_map<std::string, std::size_t> taken;
    best_chunks_ = matches_ + 1;
    search(0, taken, 0, kNone, kNone);
    return {matches_, best_chunks_};
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  // Only pathological inputs with long runs of repeated tokens get near this;
  // the search then keeps the best alignment found so far.
  static constexpr std::size_t kNodeLimit = 2'000'000;

  void search(std::size_t i, std::unordered_map<std::string, std::size_t>& taken,
              std::size_t chunks, std::size_t last_h, std::size_t last_r) {
    if (chunks >= best_chunks_ || ++nodes_ > kNodeLimit) return;
    if (i == hyp_.size()) {
      best_chunks_ = chunks;
      return;
    }
    const std::string& tok = hyp_[i];
    const std::size_t quota = quota_[tok];
    const std::size_t have = taken[tok];
    const std::size_t need = quota - have;
    // remaining_[i] counts this occurrence and later ones of the same token.
    const bool may_skip = remaining_[i] > need;
    if (need > 0) {
      const auto& positions = ref_positions_[tok];
      // Continuing the current chunk first finds good bounds early.
      std::vector<std::size_t> order;
      for (std::size_t j : positions)
        if (!used_[j]) order.push_back(j);
      std::stable_partition(order.begin(), order.end(), [&](std::size_t j) {
        return last_h != kNone && last_h + 1 == i && last_r + 1 == j;
      });
      for (std::size_t j : order) {
        const bool extends = last_h != kNone && last_h + 1 == i && last_r + 1 == j;
        used_[j] = true;
        ++taken[tok];
        search(i + 1, taken, chunks + (extends ? 0 : 1), i, j);
        --taken[tok];
        used_[j] = false;
      }
    }
    if (need == 0 || may_skip) search(i + 1, taken, chunks, last_h, last_r);
  }

  const TokenSeq& hyp_;
  std::unordered_map<std::string, std::vector<std::size_t>> ref_positions_;
  std::unordered_map<std::string, std::size_t> quota_;
  std::vector<std::size_t> remaining_;
  std::vector<bool> used_;
  std::size_t matches_ = 0;
  std::size_t best_chunks_ = 0;
  std::size_t nodes_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(const TokenSeq& hyp, const TokenSeq& ref) {
  return Aligner(hyp, ref).run();
}

double meteor_from_alignment(const MeteorAlignment& a, std::size_t hyp_len, std::size_t ref_len,
                             const MeteorParams& params) {
  if (a.matches == 0 || hyp_len == 0 || ref_len == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(hyp_len);
  const double r = m / static_cast<double>(ref_len);
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double frag =
      a.matches > 1 ? static_cast<double>(a.chunks - 1) / static_cast<double>(a.matches - 1) : 0.0;
  const double penalty = params.gamma * std::pow(frag, params.beta);
  return fmean * (1.0 - penalty);
}

double meteor_exact_pair(const TokenSeq& hyp, const TokenSeq& ref, const MeteorParams& params) {
  return meteor_from_alignment(meteor_align(hyp, ref), hyp.size(), ref.size(), params);
}

double meteor_exact(const TextSet& hyps, const TextSet& refs, const MeteorParams& params) {
  check_sets(hyps, refs, "meteor_exact");
  double total = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += meteor_exact_pair(hyps[i], refs[i], params);
  return total / static_cast<double>(hyps.size());
}

double length_ratio(const TextSet& hyps, const TextSet& refs) {
  if (refs.empty()) throw InvalidArgument("length_ratio: empty reference set");
  if (hyps.empty()) throw InvalidArgument("length_ratio: empty hypothesis set");
  double h = 0.0, r = 0.0;
  for (const auto& t : hyps) h += static_cast<double>(t.size());
  for (const auto& t : refs) r += static_cast<double>(t.size());
  if (r == 0.0) throw InvalidArgument("length_ratio: references are all empty");
  return (h / static_cast<double>(hyps.size())) / (r / static_cast<double>(refs.size()));
}

double DecomposableMetric::operator()(const TextSet& hyps, const TextSet& refs) const {
  check_sets(hyps, refs, name.c_str());
  std::vector<double> sum;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto s = stats(hyps[i], refs[i]);
    if (sum.empty()) sum.assign(s.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) sum[k] += s[k];
  }
  return aggregate(sum);
}

DecomposableMetric bleu_metric(int max_n) {
  if (max_n < 1) throw InvalidArgument("bleu: max_n must be >= 1");
  return {"BLEU" + std::to_string(max_n),
          [max_n](const TokenSeq& h, const TokenSeq& r) { return bleu_stats(h, r, max_n); },
          [max_n](const std::vector<double>& s) { return bleu_from_stats(s, max_n); }};
}

namespace {

Aggregate mean_of_first() {
  return [](const std::vector<double>& s) { return s[0] / s[1]; };
}

}  // namespace

DecomposableMetric rouge_l_metric() {
  return {"ROUGE-L",
          [](const TokenSeq& h, const TokenSeq& r) { return std::vector<double>{rouge_l_pair(h, r), 1.0}; },
          mean_of_first()};
}

DecomposableMetric meteor_metric() {
  return {"METEOR",
          [](const TokenSeq& h, const TokenSeq& r) {
            return std::vector<double>{meteor_exact_pair(h, r), 1.0};
          },
          mean_of_first()};
}

double paired_bootstrap(const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b, const Aggregate& aggregate,
                        std::size_t resamples, std::uint64_t seed) {
  if (a.size() != b.size()) throw InvalidArgument("paired_bootstrap: misaligned output sets");
  if (a.empty()) throw InvalidArgument("paired_bootstrap: no examples");
  if (resamples < 1000) throw InvalidArgument("paired_bootstrap: need at least 1000 resamples");
  const std::size_t n = a.size();
  const std::size_t width = a.front().size();
  for (std::size_t i = 0; i < n; ++i)
    if (a[i].size() != width || b[i].size() != width)
      throw InvalidArgument("paired_bootstrap: ragged statistics");

  auto total = [&](const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>* idx) {
    std::vector<double> sum(width, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& row = rows[idx ? (*idx)[k] : k];
      for (std::size_t c = 0; c < width; ++c) sum[c] += row[c];
    }
    return aggregate(sum);
  };
  const double full = total(a, nullptr) - total(b, nullptr);
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::size_t flips = 0;
  for (std::size_t s = 0; s < resamples; ++s) {
    for (auto& i : idx) i = rng.index(n);
    const double d = total(a, &idx) - total(b, &idx);
    if (d == 0.0 || (d > 0.0) != (full > 0.0) || full == 0.0) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(resamples);
}

double paired_bootstrap(const TextSet& outputs_a, const TextSet& outputs_b,
                        const TextSet& references, const DecomposableMetric& metric,
                        std::size_t resamples, std::uint64_t seed) {
  check_sets(outputs_a, references, "paired_bootstrap");
  check_sets(outputs_b, references, "paired_bootstrap");
  std::vector<std::vector<double>> a, b;
  a.reserve(references.size());
  b.reserve(references.size());
  for (std::size_t i = 0; i < references.size(); ++i) {
    a.push_back(metric.stats(outputs_a[i], references[i]));
    b.push_back(metric.stats(outputs_b[i], references[i]));
  }
  return paired_bootstrap(a, b, metric.aggregate, resamples, seed);
}

double paired_bootstrap_mean(const std::vector<double>& values_a,
                             const std::vector<double>& values_b, std::size_t resamples,
                             std::uint64_t seed) {
  std::vector<std::vector<double>> a, b;
  for (double v : values_a) a.push_back({v, 1.0});
  for (double v : values_b) b.push_back({v, 1.0});
  return paired_bootstrap(a, b, mean_of_first(), resamples, seed);
}

}  // namespace qgrl
