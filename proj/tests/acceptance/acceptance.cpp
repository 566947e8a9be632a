// SPDX-License-Identifier: Apache-2.0
// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails. Criteria 7 and 9 drive the qgrl binary through two
// full runs of the desk profile.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qgrl/analysis.hpp"
#include "qgrl/corpus.hpp"
#include "qgrl/decoding.hpp"
#include "qgrl/generator.hpp"
#include "qgrl/metrics.hpp"
#include "qgrl/negatives.hpp"
#include "qgrl/rewards.hpp"
#include "qgrl/synthetic.hpp"
#include "qgrl/trainer.hpp"
#include "support/oracles.hpp"
#include "support/process.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qgrl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Tally {
 public:
  void check(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (first_.empty()) first_ = what;
  }
  std::size_t failures() const { return failures_; }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " violation(s), first: " + first_};
  }

 private:
  std::size_t failures_ = 0;
  std::string first_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: reward formulas ------------------------------------------------------

Outcome reward_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  const RewardConfig cfg;
  Tally t;
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(1 + rng.index(12));
    for (auto& x : p) x = rng.uniform() < 0.05 ? 0.0 : rng.uniform(1e-4, 1.0);
    t.check(std::abs(fluency_reward(p, cfg) - oracle::fluency(p, cfg.epsilon)) <= 1e-9, "fluency");

    const double q = rng.uniform() < 0.05 ? 1.0 : rng.uniform();
    t.check(std::abs(relevance_reward(q, cfg) - oracle::relevance(q, cfg.epsilon)) <= 1e-9, "relevance");

    const nn::Index n = 1 + static_cast<nn::Index>(rng.index(40));
    const nn::Vector s = oracle::random_distribution(rng, n, 1.0 + 6.0 * rng.uniform());
    const nn::Vector e = oracle::random_distribution(rng, n, 1.0 + 6.0 * rng.uniform());
    t.check(max_span_score(s, e, cfg.max_answer_length) == oracle::max_span(s, e, cfg.max_answer_length),
            "answerability max differs from enumeration");
    t.check(std::abs(answerability_reward(SpanDistributions{s, e}, cfg) -
                     oracle::answerability(s, e, cfg.max_answer_length, cfg.epsilon)) <= 1e-9,
            "answerability");

    const double pt = rng.uniform(1e-6, 1.0), alpha = rng.uniform(), lambda = 5.0 * rng.uniform();
    t.check(std::abs(focal_loss(pt, alpha, lambda) - oracle::focal(pt, alpha, lambda)) <= 1e-9, "focal");
  }
  const double secs = seconds_since(t0);
  t.check(secs < 60.0, "runtime over 1 min");
  return t.outcome("200 inputs per reward within 1e-9, span max exact, " + fmt("%.2fs", secs));
}

// ---- 2: reductions -----------------------------------------------------------

Outcome reductions() {
  Tally t;
  Rng rng(102);
  LossWeights zero;
  zero.fluency = zero.relevance = zero.answerability = 0.0;
  SampledSequence s;
  s.tokens = {5, 6, 3};
  s.log_probs = {-0.3, -2.2, -0.9};
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(1e-9, 1.0);
    t.check(std::abs(focal_loss(p, 1.0, 0.0) - (-std::log(p))) <= 1e-9, "focal(lambda=0, alpha=1) != CE");
    const double base = rng.uniform(0.0, 10.0);
    t.check(joint_loss(base, rng.uniform(-50, 50), rng.uniform(-5, 5), rng.uniform(-5, 5), zero) == base,
            "joint_loss with zero weights != L_base");
    const double r = rng.uniform(-20.0, 5.0);
    t.check(rl_loss(s, r, r) == 0.0, "rl_loss at reward = baseline != 0");
    nn::Graph g;
    t.check(rl_loss(g.scalar(-1.7), r, r).scalar() == 0.0, "rl_loss node at reward = baseline != 0");
  }
  return t.outcome("focal -> CE, zero-weight joint = L_base, zero-advantage rl_loss = 0");
}

// ---- 3: gradient checks ------------------------------------------------------

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  Generator g = oracle::tiny_generator(103);
  const std::size_t params = g.params().scalar_count();
  const TokenSeq doc = tokenize("Austen wrote Emma in Lyme .");
  const TokenSeq question = tokenize("who wrote Lyme ?");
  const SourceDocument src = g.prepare(doc);

  const auto mle = oracle::gradient_check(g.params(), [&](nn::Graph& graph) { return g.mle_loss(graph, src, question); });

  const auto s1 = g.sample(doc, 6, 11), s2 = g.sample(doc, 6, 12), s3 = g.sample(doc, 6, 13);
  const LossWeights w;
  const BaselineConfig b;
  const auto joint = oracle::gradient_check(g.params(), [&](nn::Graph& graph) {
    nn::Var loss = g.mle_loss(graph, src, question);
    loss = nn::add(loss, nn::scale(rl_loss(g.mean_log_prob(graph, src, s1.tokens), -4.2, b.fluency), w.fluency));
    loss = nn::add(loss, nn::scale(rl_loss(g.mean_log_prob(graph, src, s2.tokens), 0.35, b.relevance), w.relevance));
    return nn::add(loss, nn::scale(rl_loss(g.mean_log_prob(graph, src, s3.tokens), 1.9, b.answerability),
                                   w.answerability));
  });
  const double secs = seconds_since(t0);
  Tally t;
  t.check(params <= 5000, "model has more than 5k parameters");
  t.check(mle.pass_rate() >= 0.95, "mle_loss pass rate " + fmt("%.4f", mle.pass_rate()));
  t.check(joint.pass_rate() >= 0.95, "joint_loss pass rate " + fmt("%.4f", joint.pass_rate()));
  t.check(secs < 300.0, "runtime over 5 min");
  return t.outcome(std::to_string(params) + " params; mle " + fmt("%.4f", mle.pass_rate()) + ", joint " +
                   fmt("%.4f", joint.pass_rate()) + " of coordinates within 1e-4, " + fmt("%.1fs", secs));
}

// ---- 4: distributions and coverage -------------------------------------------

Outcome distributions() {
  Tally t;
  Rng rng(104);
  const Generator g = oracle::tiny_generator(104, 12, 8);
  std::size_t steps = 0;
  while (steps < 1000) {
    GeneratorSession session(g, oracle::random_document(rng, 2 + rng.index(15)));
    const auto& src = session.source();
    DecoderStep s = session.first_step();
    nn::Vector running = nn::Vector::Zero(s.attention.size());
    for (int k = 0; k < 25 && steps < 1000; ++k, ++steps) {
      t.check(std::abs(s.distribution.sum() - 1.0) <= 1e-6, "extended distribution sum");
      t.check(std::abs(s.attention.sum() - 1.0) <= 1e-6, "attention sum");
      t.check(s.distribution.minCoeff() >= 0.0, "negative probability");
      t.check(s.coverage == running, "coverage != sum of previous attention");
      running += s.attention;
      // Random previous tokens, including document-local ids.
      s = session.advance(s, static_cast<TokenId>(rng.index(src.extended_size())));
    }
  }
  return t.outcome("1000 decode steps, sums within 1e-6, coverage recurrence exact");
}

// ---- 5: negatives --------------------------------------------------------------

// Uniformity over k outcomes as one statistic: Pearson chi-square with k - 1
// degrees of freedom, standardised, within 3 sigma. Per-cell bands would
// flag one of 18 fair cells about 5% of the time.
template <class Key>
bool uniform_within_3_sigma(const std::map<Key, std::size_t>& hits, std::size_t k) {
  if (hits.size() != k || k < 2) return false;
  double n = 0.0;
  for (const auto& [key, c] : hits) n += static_cast<double>(c);
  const double expect = n / static_cast<double>(k);
  double chi2 = 0.0;
  for (const auto& [key, c] : hits) chi2 += (static_cast<double>(c) - expect) * (static_cast<double>(c) - expect) / expect;
  const double df = static_cast<double>(k - 1);
  return (chi2 - df) / std::sqrt(2.0 * df) <= 3.0;
}

Outcome negatives() {
  Tally t;
  Rng rng(105);
  const Corpus corpus = synthetic::generate(1000, Split::kTrain, "n", rng);
  const EntityInventory inv = EntityInventory::from_corpus(corpus);
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : corpus.examples) by_id[ex.id] = &ex;
  std::size_t made[3] = {0, 0, 0};

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Example& ex = corpus.examples[i];
    const auto q = make_question_swap(corpus, i, rng);
    ++made[0];
    t.check(q.donor_id != ex.id, "question swap kept its own question");
    t.check(by_id.count(q.donor_id) && q.example.question == by_id[q.donor_id]->question, "donor question");
    t.check(q.example.document == ex.document, "question swap changed the document");

    if (const auto s = make_inter_doc_entity_swap(ex, inv, rng)) {
      ++made[1];
      t.check(!contains_subsequence(ex.document, s->replacement), "inter replacement occurs in document");
      t.check(contains_subsequence(ex.question, s->replaced), "inter replaced entity not in question");
      t.check(s->replacement != s->replaced, "inter no-op swap");
      bool same_type = false;
      for (const auto& [type, surfaces] : inv.by_type)
        same_type |= surfaces.count(s->replaced) && surfaces.count(s->replacement);
      t.check(same_type, "inter replacement of a different type");
      t.check(s->example.question == replace_all(ex.question, s->replaced, s->replacement), "inter rewrite");
      t.check(s->example.document == ex.document, "inter swap changed the document");
    }
    if (const auto s = make_intra_doc_entity_swap(ex, rng)) {
      ++made[2];
      t.check(contains_subsequence(ex.document, s->replacement), "intra replacement absent from document");
      t.check(contains_subsequence(ex.question, s->replaced), "intra replaced entity not in question");
      t.check(s->replacement != s->replaced, "intra no-op swap");
      t.check(s->example.question == replace_all(ex.question, s->replaced, s->replacement), "intra rewrite");
    }
  }
  t.check(made[0] == 1000 && made[1] == 1000 && made[2] == 1000, "fewer than 1000 negatives of some kind");

  // Uniformity of the random choices on fixed inputs.
  {
    Corpus five;
    for (int i = 0; i < 5; ++i) five.examples.push_back(corpus.examples[static_cast<std::size_t>(i)]);
    std::map<std::string, std::size_t> hits;
    for (int i = 0; i < 1000; ++i) ++hits[make_question_swap(five, 0, rng).donor_id];
    t.check(uniform_within_3_sigma(hits, 4), "donor frequencies not uniform");
  }
  {
    const Example& ex = corpus.examples[0];
    std::map<TokenSeq, std::size_t> hits;
    for (int i = 0; i < 1000; ++i) ++hits[make_intra_doc_entity_swap(ex, rng)->replacement];
    // Every document entity other than the mentioned one.
    std::set<TokenSeq> distinct;
    for (const auto& e : ex.entities) distinct.insert(ex.entity_tokens(e));
    t.check(uniform_within_3_sigma(hits, distinct.size() - 1), "intra replacements not uniform");
  }
  {
    const Example& ex = corpus.examples[1];
    std::map<TokenSeq, std::size_t> hits;
    for (int i = 0; i < 1000; ++i) ++hits[make_inter_doc_entity_swap(ex, inv, rng)->replacement];
    // The synthetic question names one entity; its same-type candidates are
    // the type inventory minus what the document mentions.
    TokenSeq mention;
    for (const auto& [type, surfaces] : inv.by_type)
      for (const auto& s : surfaces)
        if (contains_subsequence(ex.question, s)) mention = s;
    std::size_t candidates = 0;
    for (const auto& [type, surfaces] : inv.by_type)
      if (surfaces.count(mention))
        for (const auto& s : surfaces) candidates += s != mention && !contains_subsequence(ex.document, s);
    t.check(uniform_within_3_sigma(hits, candidates), "inter replacements not uniform");
  }
  return t.outcome("1000 per kind, 0 violations; donor and replacement frequencies within 3 sigma");
}

// ---- 6: metrics and beam --------------------------------------------------------

Outcome metric_oracles() {
  Tally t;
  Rng rng(106);
  TextSet hs, rs;
  for (int i = 0; i < 50; ++i) {
    const TokenSeq h = oracle::random_sentence(rng, 1, 8, 3), r = oracle::random_sentence(rng, 1, 8, 3);
    hs.push_back(h);
    rs.push_back(r);
    const auto stats = bleu_stats(h, r, 4);
    const auto counts = oracle::bleu_counts({h}, {r}, 4);
    for (std::size_t n = 0; n < 4; ++n) {
      t.check(stats[n] == static_cast<double>(counts.matches[n]), "BLEU clipped count");
      t.check(stats[4 + n] == static_cast<double>(counts.totals[n]), "BLEU n-gram total");
    }
    t.check(std::abs(bleu({h}, {r}, 4) - oracle::bleu({h}, {r}, 4)) <= 1e-12, "BLEU pair");
    t.check(lcs_length(h, r) == oracle::lcs(h, r), "LCS length");
    t.check(std::abs(rouge_l_pair(h, r) - oracle::rouge_l(h, r)) <= 1e-12, "ROUGE-L");
    const auto a = meteor_align(h, r);
    const auto b = oracle::meteor_alignment(h, r);
    t.check(a.matches == b.matches && a.chunks == b.chunks, "METEOR alignment");
    t.check(std::abs(meteor_exact_pair(h, r) - oracle::meteor(h, r)) <= 1e-12, "METEOR");
  }
  t.check(std::abs(bleu(hs, rs, 4) - oracle::bleu(hs, rs, 4)) <= 1e-12, "corpus BLEU");
  t.check(bleu(rs, rs, 4) == 1.0, "BLEU of identical sets");
  t.check(rouge_l(rs, rs) == 1.0, "ROUGE-L of identical sets");
  t.check(meteor_exact(rs, rs) == 1.0, "METEOR of identical sets");

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const oracle::ToyModel m{3, seed};
    const Hypothesis truth = oracle::exhaustive_best(m, 2);
    t.check(beam_search(m, 9, 2).tokens == truth.tokens, "beam missed the argmax");
  }
  return t.outcome("50 random pairs match brute force (counts exact, scores within 1e-12); identity = 1.0; "
                   "exhaustive beam = argmax on 100 toy models");
}

// ---- 8: analysis -----------------------------------------------------------------

Outcome analysis_checks() {
  Tally t;
  Rng rng(108);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.index(40);
    std::vector<std::optional<double>> x, neg, y, affine;
    const double a = rng.uniform(0.01, 50.0), b = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rng.uniform(-3, 3), w = rng.uniform(-3, 3);
      x.push_back(v);
      neg.push_back(-v);
      y.push_back(w);
      affine.push_back(a * w + b);
    }
    const auto m = pearson_matrix({{"x", x}, {"neg", neg}, {"y", y}, {"aff", affine}});
    t.check(std::abs(*m.r[0][0] - 1.0) <= 1e-9, "self correlation");
    t.check(std::abs(*m.r[0][1] + 1.0) <= 1e-9, "negated correlation");
    t.check(std::abs(*m.r[0][3] - *m.r[0][2]) <= 1e-9, "affine invariance");

    std::map<std::string, double> rewards, ratings;
    std::vector<std::vector<double>> expect(5);
    for (int i = 0; i < 50; ++i) {
      const std::string id = "q" + std::to_string(i);
      rewards[id] = rng.uniform(-10, 0);
      ratings[id] = rng.uniform(1.0, 5.0);
      // Oracle bucket: nearest level, halves up.
      const int level = std::min(5, std::max(1, static_cast<int>(std::floor(ratings[id] + 0.5))));
      expect[static_cast<std::size_t>(level - 1)].push_back(rewards[id]);
    }
    const auto s = reward_rating_distribution(rewards, ratings, kFluencyScale);
    for (std::size_t k = 0; k < 5; ++k) {
      auto e = expect[k];
      std::sort(e.begin(), e.end());
      t.check(s.buckets[k].scores == e && s.buckets[k].count == e.size(), "bucket contents");
      if (e.empty()) {
        t.check(!s.buckets[k].median, "empty bucket has a median");
        continue;
      }
      const double med = e.size() % 2 ? e[e.size() / 2] : (e[e.size() / 2 - 1] + e[e.size() / 2]) / 2;
      t.check(*s.buckets[k].min == e.front() && *s.buckets[k].max == e.back() && *s.buckets[k].median == med,
              "bucket summary");
    }
  }
  return t.outcome("+-1 within 1e-9, affine invariant, 50 distributions match the sort oracle");
}

// ---- 7 and 9: pipeline ---------------------------------------------------------------

struct Pipeline {
  std::string cli;
  std::string config;
  fs::path root;

  testing::RunResult step(const std::string& run, std::vector<std::string> args, std::string& log) const {
    const fs::path dir = root / run;
    std::string label;
    for (const auto& a : args) label += " " + a;
    args.insert(args.end(), {"--config", config, "--data-dir", (dir / "data").string(), "--out-dir",
                             (dir / "out").string()});
    const auto t0 = std::chrono::steady_clock::now();
    auto r = testing::run(cli, args, dir.string());
    log += "  " + run + label + ": " +
           fmt("%.0fs", seconds_since(t0)) + (r.exit_code ? " FAILED " + r.err : "") + "\n";
    return r;
  }

  /// The whole desk pipeline; false on the first failing stage.
  bool full(const std::string& run, std::string& log, std::string& error) const {
    fs::create_directories(root / run);
    const std::vector<std::vector<std::string>> stages = {
        {"synthesize"},
        {"train-lm"},
        {"make-negatives"},
        {"train-disc"},
        {"train-qa"},
        {"pretrain", "--name", "B1"},
        {"finetune", "--rewards", "F"},
        {"finetune", "--rewards", "R"},
        {"finetune", "--rewards", "A"},
        {"generate", "--model", "B1", "--split", "test"},
        {"generate", "--model", "F", "--split", "test"},
        {"generate", "--model", "R", "--split", "test"},
        {"generate", "--model", "A", "--split", "test"},
        {"generate", "--model", "B1", "--split", "dev"},
        {"generate", "--model", "F", "--split", "dev"},
        {"generate", "--model", "R", "--split", "dev"},
        {"generate", "--model", "A", "--split", "dev"},
        {"evaluate"},
        {"evaluate", "--evaluate.split", "dev", "--paths.reports", (root / run / "out" / "reports-dev").string()},
        {"simulate-ratings"},
        {"analyze"},
    };
    for (const auto& s : stages) {
      const auto r = step(run, s, log);
      if (r.exit_code != 0) {
        error = s.front() + ": " + r.err;
        return false;
      }
      if (s.front() == "pretrain") pretrain_summary[run] = json::parse(r.out);
    }
    return true;
  }

  mutable std::map<std::string, json> pretrain_summary;
};

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testing::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream l(line);
    std::string c;
    while (std::getline(l, c, '\t')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

const std::vector<std::string>* row_named(const std::vector<std::vector<std::string>>& rows, const std::string& n) {
  for (const auto& r : rows)
    if (!r.empty() && r[0] == n) return &r;
  return nullptr;
}

Outcome directional(const Pipeline& p, const std::string& run, double pipeline_secs) {
  Tally t;
  const fs::path out = p.root / run / "out";
  std::ostringstream detail;

  // (a) dev perplexity against the grammar bound.
  const Corpus dev = load_dataset((p.root / run / "data" / "dev.jsonl").string());
  const double bound = synthetic::perplexity_bound(dev, synthetic::conditional_question_entropy());
  const double ppl = p.pretrain_summary.at(run).at("dev_perplexity").get<double>();
  t.check(ppl <= 1.5 * bound, "(a) dev perplexity " + fmt("%.3f", ppl) + " > 1.5 x bound " + fmt("%.3f", bound));
  detail << "(a) ppl " << fmt("%.3f", ppl) << " <= " << fmt("%.3f", 1.5 * bound) << (ppl <= 1.5 * bound ? " ok" : " NO");

  // (b), (c) reward gains on dev against B1.
  const auto dev_rows = read_tsv((out / "reports-dev" / "report.tsv").string());
  auto delta = [&](const std::string& system, std::size_t column) {
    const auto* r = row_named(dev_rows, system);
    if (!r || r->size() <= column || (*r)[column] == "-") return std::nan("");
    return std::stod((*r)[column]);
  };
  const double rel = delta("R", 9), flu = delta("F", 8);
  t.check(rel > 0.0, "(b) R fine-tuning dR-REL on dev = " + fmt("%+.3f", rel));
  t.check(flu > 0.0, "(c) F fine-tuning dR-FLU on dev = " + fmt("%+.3f", flu));
  detail << "; (b) dR-REL " << fmt("%+.2f", rel) << (rel > 0 ? " ok" : " NO");
  detail << "; (c) dR-FLU " << fmt("%+.2f", flu) << (flu > 0 ? " ok" : " NO");

  // (d) columns and significance marks, on both reports.
  bool columns_ok = true, marks_ok = true;
  for (const char* dir : {"reports", "reports-dev"}) {
    const auto rows = read_tsv((out / dir / "report.tsv").string());
    const auto details = read_tsv((out / dir / "report_details.tsv").string());
    const std::vector<std::string> header = {"Model", "F", "R", "A", "BLEU1", "BLEU4", "METEOR", "ROUGE-L",
                                             "R-FLU", "R-REL", "R-ANS"};
    columns_ok &= !rows.empty() && rows[0] == header && rows.size() == 5;
    for (std::size_t i = 1; i < rows.size() && i < details.size(); ++i) {
      for (std::size_t k = 0; k < 7; ++k) {
        const std::string& cell = rows[i][4 + k];
        const std::string& p_cell = details[i][2 + k];
        const bool starred = !cell.empty() && cell.back() == '*';
        const bool significant = p_cell != "NA" && std::stod(p_cell) < 0.01;
        marks_ok &= starred == significant;
      }
    }
  }
  t.check(columns_ok, "(d) report columns differ from the table layout");
  t.check(marks_ok, "(d) '*' marks disagree with p < 0.01");
  detail << "; (d) columns " << (columns_ok ? "ok" : "NO") << ", marks " << (marks_ok ? "ok" : "NO");
  t.check(pipeline_secs < 1800.0, "pipeline over 30 min");
  detail << "; " << fmt("%.0fs", pipeline_secs);
  Outcome o = t.outcome(detail.str());
  if (!o.pass) o.detail += " | " + detail.str();
  return o;
}

Outcome reproducible(const Pipeline& p) {
  Tally t;
  std::size_t compared = 0;
  for (const char* dir : {"reports", "reports-dev", "analysis"}) {
    const fs::path a = p.root / "run1" / "out" / dir;
    for (const auto& e : fs::directory_iterator(a)) {
      const std::string name = e.path().filename().string();
      const fs::path b = p.root / "run2" / "out" / dir / name;
      // Snapshots name their own directories; everything else must match.
      if (name.rfind("config.", 0) == 0) continue;
      ++compared;
      t.check(fs::exists(b) && testing::read_file(e.path().string()) == testing::read_file(b.string()),
              std::string(dir) + "/" + name + " differs");
    }
  }
  t.check(compared >= 8, "too few report files");
  return t.outcome(std::to_string(compared) + " report and analysis files byte-identical across two runs");
}

}  // namespace

int main(int argc, char** argv) {
  bool pipeline = true;
  std::string work = (fs::temp_directory_path() / "qgrl-acceptance").string();
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--no-pipeline") pipeline = false;
    else if (a == "--work-dir" && i + 1 < argc) work = argv[++i];
    else {
      std::cerr << "usage: acceptance [--no-pipeline] [--work-dir DIR]\n";
      return 2;
    }
  }

  std::size_t failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")" << std::endl;
  };

  report(1, reward_oracles);
  report(2, reductions);
  report(3, gradient_checks);
  report(4, distributions);
  report(5, negatives);
  report(6, metric_oracles);

  Pipeline p{QGRL_CLI_PATH, std::string(QGRL_CONFIG_DIR) + "/desk.json", work, {}};
  std::string log, error1, error2;
  bool ok1 = false, ok2 = false;
  double secs1 = 0.0;
  if (pipeline) {
    fs::remove_all(work);
    auto t0 = std::chrono::steady_clock::now();
    ok1 = p.full("run1", log, error1);
    secs1 = seconds_since(t0);
    if (ok1) ok2 = p.full("run2", log, error2);
    std::cerr << "pipeline stages:\n" << log;
  }

  report(7, [&]() -> Outcome {
    if (!pipeline) return {false, "skipped (--no-pipeline)"};
    if (!ok1) return {false, "pipeline failed: " + error1};
    return directional(p, "run1", secs1);
  });
  report(8, analysis_checks);
  report(9, [&]() -> Outcome {
    if (!pipeline) return {false, "skipped (--no-pipeline)"};
    if (!ok1 || !ok2) return {false, "pipeline failed: " + (ok1 ? error2 : error1)};
    return reproducible(p);
  });
  return failed == 0 ? 0 : 1;
}
