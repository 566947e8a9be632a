// SPDX-License-Identifier: Apache-2.0
#include "qgrl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "qgrl/error.hpp"

namespace qgrl {

ScoredOutputs score_outputs(const TextSet& documents, const TextSet& hypotheses,
                            const RewardOracles& oracles, const RewardConfig& cfg) {
  if (documents.size() != hypotheses.size())
    throw InvalidArgument("score_outputs: documents and hypotheses differ in count");
  ScoredOutputs out;
  out.oracle_fingerprint = oracles.fingerprint();
  out.scores.reserve(hypotheses.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    out.scores.push_back(score_rewards(documents[i], hypotheses[i], oracles, cfg));
  return out;
}

namespace {

using Field = std::optional<double> RewardScores::*;
constexpr std::array<Field, 3> kFields = {&RewardScores::fluency, &RewardScores::relevance,
                                          &RewardScores::answerability};

std::optional<double> mean_of(const ScoredOutputs& s, Field f) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : s.scores)
    if (r.*f) {
      total += *(r.*f);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

void check_pair(const ScoredOutputs& a, const ScoredOutputs& b) {
  if (a.oracle_fingerprint != b.oracle_fingerprint)
    throw InvalidArgument("reward_gain: outputs were scored by different oracles (" +
                          a.oracle_fingerprint + " vs " + b.oracle_fingerprint + ")");
  if (a.scores.size() != b.scores.size())
    throw InvalidArgument("reward_gain: output sets differ in size");
}

}  // namespace

RewardGain reward_gain(const ScoredOutputs& model, const ScoredOutputs& baseline) {
  check_pair(model, baseline);
  std::array<std::optional<double>, 3> d;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto m = mean_of(model, kFields[k]);
    const auto b = mean_of(baseline, kFields[k]);
    if (m && b) d[k] = *m - *b;
  }
  return RewardGain{d[0], d[1], d[2]};
}

namespace {

// Examples where both systems have the reward, for the paired test.
std::pair<std::vector<double>, std::vector<double>> paired_values(const ScoredOutputs& a,
                                                                  const ScoredOutputs& b, Field f) {
  std::vector<double> va, vb;
  for (std::size_t i = 0; i < a.scores.size(); ++i)
    if (a.scores[i].*f && b.scores[i].*f) {
      va.push_back(*(a.scores[i].*f));
      vb.push_back(*(b.scores[i].*f));
    }
  return {va, vb};
}

std::string fixed2(double v, bool sign) {
  char buf[64];
  std::snprintf(buf, sizeof buf, sign ? "%+.2f" : "%.2f", v);
  return buf;
}

bool significant(const std::optional<double>& p, double level) { return p && *p < level; }

std::vector<std::vector<std::string>> cells(const ReportTable& t) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> header = {"Model", "F", "R", "A"};
  for (const char* c : kMetricColumns) header.emplace_back(c);
  for (const char* c : kRewardColumns) header.emplace_back(c);
  out.push_back(header);
  for (const auto& row : t.rows) {
    std::vector<std::string> line = {row.name, row.fluency ? "x" : "", row.relevance ? "x" : "",
                                     row.answerability ? "x" : ""};
    for (std::size_t k = 0; k < 4; ++k)
      line.push_back(fixed2(100.0 * row.metrics[k], false) +
                     (significant(row.metric_p[k], t.significance) ? "*" : ""));
    for (std::size_t k = 0; k < 3; ++k) {
      if (row.is_reference || !row.reward_deltas[k]) {
        line.emplace_back("-");
        continue;
      }
      line.push_back(fixed2(*row.reward_deltas[k], true) +
                     (significant(row.reward_p[k], t.significance) ? "*" : ""));
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::string join_tsv(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "\t" : "") << r[i];
    out << '\n';
  }
  return out.str();
}

std::string p_text(const std::optional<double>& p) {
  if (!p) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *p);
  return buf;
}

}  // namespace

std::string ReportTable::to_tsv() const { return join_tsv(cells(*this)); }

std::string ReportTable::to_text() const {
  const auto rows_ = cells(*this);
  std::vector<std::size_t> width(rows_.front().size(), 0);
  for (const auto& r : rows_)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::ostringstream out;
  auto rule = [&] {
    for (std::size_t i = 0; i < width.size(); ++i) {
      out << std::string(width[i] + 2, '-');
      if (i + 1 < width.size()) out << ((i == 0 || i == 3 || i == 7) ? "++" : "+");
    }
    out << '\n';
  };
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (std::size_t i = 0; i < rows_[r].size(); ++i) {
      const std::string& c = rows_[r][i];
      const std::size_t pad = width[i] - c.size();
      // Model names align left, numbers right.
      if (i == 0)
        out << ' ' << c << std::string(pad, ' ') << ' ';
      else
        out << ' ' << std::string(pad, ' ') << c << ' ';
      if (i + 1 < rows_[r].size()) out << ((i == 0 || i == 3 || i == 7) ? "||" : "|");
    }
    out << '\n';
    if (r == 0) rule();
  }
  out << "METEOR is exact-match only. * marks p < " << significance
      << " (paired bootstrap) against " << reference << ".\n";
  return out.str();
}

std::string ReportTable::details_tsv() const {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> header = {"Model", "length_ratio"};
  for (const char* c : kMetricColumns) header.push_back(std::string("p_") + c);
  for (const char* c : kRewardColumns) header.push_back(std::string("p_") + c);
  out.push_back(header);
  for (const auto& row : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", row.length_ratio);
    std::vector<std::string> line = {row.name, buf};
    for (const auto& p : row.metric_p) line.push_back(p_text(p));
    for (const auto& p : row.reward_p) line.push_back(p_text(p));
    out.push_back(std::move(line));
  }
  return join_tsv(out);
}

ReportTable build_report(const TextSet& documents, const TextSet& references,
                         const std::vector<SystemOutputs>& systems, const RewardOracles& oracles,
                         const ReportOptions& options) {
  if (systems.empty()) throw InvalidArgument("build_report: no systems");
  if (documents.size() != references.size())
    throw InvalidArgument("build_report: documents and references differ in count");
  for (const auto& s : systems)
    if (s.hypotheses.size() != references.size())
      throw InvalidArgument("build_report: system '" + s.name + "' is not aligned with the references");

  const std::array<DecomposableMetric, 4> metrics = {bleu_metric(1), bleu_metric(4),
                                                     meteor_metric(), rouge_l_metric()};
  ReportTable table;
  table.reference = systems.front().name;
  table.significance = options.significance;

  std::vector<ScoredOutputs> scored;
  for (const auto& s : systems)
    scored.push_back(score_outputs(documents, s.hypotheses, oracles, options.reward));

  for (std::size_t si = 0; si < systems.size(); ++si) {
    const auto& sys = systems[si];
    ReportRow row;
    row.name = sys.name;
    row.fluency = sys.fluency;
    row.relevance = sys.relevance;
    row.answerability = sys.answerability;
    row.is_reference = si == 0;
    row.length_ratio = length_ratio(sys.hypotheses, references);
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      row.metrics[k] = metrics[k](sys.hypotheses, references);
      if (si > 0)
        row.metric_p[k] = paired_bootstrap(sys.hypotheses, systems.front().hypotheses, references,
                                           metrics[k], options.resamples, options.seed + k);
    }
    if (si > 0) {
      const RewardGain gain = reward_gain(scored[si], scored.front());
      row.reward_deltas = {gain.fluency, gain.relevance, gain.answerability};
      for (std::size_t k = 0; k < 3; ++k) {
        if (!row.reward_deltas[k]) continue;
        auto [a, b] = paired_values(scored[si], scored.front(), kFields[k]);
        if (!a.empty())
          row.reward_p[k] = paired_bootstrap_mean(a, b, options.resamples, options.seed + 4 + k);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace qgrl
