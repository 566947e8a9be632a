// SPDX-License-Identifier: Apache-2.0
#include "qgrl/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "qgrl/error.hpp"

namespace qgrl::synthetic {

namespace {

enum Type { kPer = 0, kOrg, kLoc, kWork, kYear, kTypeCount };

const std::vector<std::string> kTypeNames = {"PER", "ORG", "LOC", "WORK", "YEAR"};

const std::vector<std::vector<std::string>> kNames = {
    {"Alice", "Bruno", "Chen", "Dmitri", "Elena", "Farah", "Gustav", "Hana", "Ivan", "Jomo",
     "Keiko", "Luis", "Mira", "Nadia", "Omar", "Priya", "Quinn", "Rosa", "Sven", "Tariq"},
    {"Acme", "Borealis", "Cobalt", "Dynamo", "Everest", "Fulcrum", "Granite", "Helix", "Ionix",
     "Juniper", "Kestrel", "Lumen", "Meridian", "Nimbus", "Orion", "Pinnacle", "Quasar",
     "Redwood", "Summit", "Tundra"},
    {"Paris", "Lagos", "Osaka", "Lima", "Oslo", "Cairo", "Quito", "Perth", "Delhi", "Turin",
     "Bergen", "Dakar", "Hanoi", "Kyoto", "Malmo", "Nantes", "Porto", "Riga", "Sofia", "Tunis"},
    {"Hamlet", "Odyssey", "Ulysses", "Beloved", "Dracula", "Emma", "Frankenstein", "Ivanhoe",
     "Matilda", "Middlemarch", "Persuasion", "Rebecca", "Siddhartha", "Walden", "Candide",
     "Faust", "Lorna", "Shirley", "Kidnapped", "Nostromo"},
    {"1905", "1911", "1917", "1922", "1928", "1933", "1939", "1944", "1950", "1956", "1961",
     "1967", "1972", "1978", "1983", "1989", "1994", "1998", "2003", "2008"},
};

struct QuestionTemplate {
  std::string text;  // "{k}" refers to slot k of the fact
  std::size_t answer_slot;
};

struct Relation {
  std::string text;  // "{k}" refers to slot k
  std::vector<Type> slots;
  std::vector<QuestionTemplate> questions;
};

const std::vector<Relation>& relations() {
  static const std::vector<Relation> kRelations = {
      {"{0} founded {1} in {2} .",
       {kPer, kOrg, kYear},
       {{"who was the founder of {1} ?", 0},
        {"in which year was {1} founded ?", 2},
        {"which company was founded by {0} ?", 1}}},
      {"{0} wrote the novel {1} .",
       {kPer, kWork},
       {{"who is the author of {1} ?", 0},
        {"which novel was written by {0} ?", 1},
        {"what is the novel by {0} ?", 1}}},
      {"{0} is headquartered in {1} .",
       {kOrg, kLoc},
       {{"in which city is {0} headquartered ?", 1},
        {"which company is headquartered in {1} ?", 0},
        {"in which city is {0} based ?", 1}}},
      {"{0} was born in {1} in {2} .",
       {kPer, kLoc, kYear},
       {{"in which city was {0} born ?", 1},
        {"in which year was {0} born ?", 2},
        {"which person was born in {1} ?", 0}}},
  };
  return kRelations;
}

const std::vector<std::string> kFillers = {
    "the archive holds several letters from that period .",
    "critics have long debated these events .",
    "little else is recorded about the early years .",
    "the story was retold in many local newspapers .",
};

std::size_t templates_per_relation() { return relations().front().questions.size(); }

/// Expands "{k}" placeholders; records the token index each slot landed on.
TokenSeq expand(const std::string& pattern, const std::vector<std::string>& fillers,
                std::vector<std::size_t>* slot_positions, std::size_t offset) {
  TokenSeq out;
  std::istringstream words(pattern);
  std::string w;
  while (words >> w) {
    if (w.size() == 3 && w.front() == '{' && w.back() == '}') {
      const std::size_t slot = static_cast<std::size_t>(w[1] - '0');
      if (slot_positions) (*slot_positions)[slot] = offset + out.size();
      out.push_back(fillers[slot]);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& entity_types() { return kTypeNames; }

Corpus generate(std::size_t count, Split split, const std::string& id_prefix, Rng& rng,
                const Options& options) {
  if (options.names_per_type < 2 || options.names_per_type > kNames.front().size())
    throw InvalidArgument("synthetic: names_per_type must be in [2, 20]");
  if (options.facts_per_document < 1 || options.facts_per_document > relations().size())
    throw InvalidArgument("synthetic: facts_per_document must be in [1, 4]");

  Corpus corpus;
  corpus.split = split;
  corpus.tokenizer = std::string(kDefaultTokenizer);
  corpus.entity_types = kTypeNames;

  for (std::size_t n = 0; n < count; ++n) {
    // Entities are drawn without replacement per type so every mention in a
    // document is unambiguous.
    std::vector<std::vector<std::size_t>> pools(kTypeCount);
    for (auto& pool : pools) {
      pool.resize(options.names_per_type);
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
      rng.shuffle(pool);
    }
    std::vector<std::size_t> rel_ids(relations().size());
    for (std::size_t i = 0; i < rel_ids.size(); ++i) rel_ids[i] = i;
    rng.shuffle(rel_ids);
    rel_ids.resize(options.facts_per_document);

    struct Fact {
      std::size_t relation;
      std::vector<std::string> names;
      std::vector<std::size_t> positions;
    };
    std::vector<Fact> facts;
    Example ex;
    ex.id = id_prefix + "-" + std::to_string(n);

    std::vector<bool> filler_after(rel_ids.size());
    for (std::size_t i = 0; i < rel_ids.size(); ++i)
      filler_after[i] = rng.uniform() < options.filler_probability / static_cast<double>(rel_ids.size());
    for (std::size_t i = 0; i < rel_ids.size(); ++i) {
      const Relation& rel = relations()[rel_ids[i]];
      Fact fact{rel_ids[i], {}, std::vector<std::size_t>(rel.slots.size())};
      for (Type t : rel.slots) {
        fact.names.push_back(kNames[t][pools[t].back()]);
        pools[t].pop_back();
      }
      TokenSeq sentence = expand(rel.text, fact.names, &fact.positions, ex.document.size());
      for (std::size_t s = 0; s < rel.slots.size(); ++s)
        ex.entities.push_back(EntitySpan{fact.positions[s], fact.positions[s], kTypeNames[rel.slots[s]]});
      ex.document.insert(ex.document.end(), sentence.begin(), sentence.end());
      facts.push_back(std::move(fact));
      if (filler_after[i]) {
        TokenSeq filler = tokenize(kFillers[rng.index(kFillers.size())]);
        ex.document.insert(ex.document.end(), filler.begin(), filler.end());
      }
    }

    const Fact& fact = facts[rng.index(facts.size())];
    const Relation& rel = relations()[fact.relation];
    const QuestionTemplate& q = rel.questions[rng.index(rel.questions.size())];
    ex.question = expand(q.text, fact.names, nullptr, 0);
    const std::size_t answer_pos = fact.positions[q.answer_slot];
    ex.answer = TokenSpan{answer_pos, answer_pos};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

double conditional_question_entropy(const Options& options) {
  return std::log(static_cast<double>(options.facts_per_document * templates_per_relation()));
}

double marginal_question_entropy(const Options& options) {
  // Relation uniform over all four by symmetry of the fact subset, template
  // uniform, and the single entity slot uniform over its type inventory.
  return std::log(static_cast<double>(relations().size() * templates_per_relation() *
                                      options.names_per_type));
}

double perplexity_bound(const Corpus& corpus, double entropy_per_question) {
  if (corpus.empty()) throw InvalidArgument("perplexity_bound: empty corpus");
  double tokens = 0.0;
  for (const auto& ex : corpus.examples) tokens += static_cast<double>(ex.question.size() + 1);
  return std::exp(entropy_per_question * static_cast<double>(corpus.size()) / tokens);
}

std::vector<std::string> simulate_ratings(const Corpus& corpus,
                                          const std::map<std::string, TokenSeq>& hypotheses,
                                          std::size_t raters, Rng& rng) {
  std::vector<std::string> rows;
  auto jitter = [&rng](int v, int lo, int hi) {
    const double u = rng.uniform();
    if (u < 0.15) --v;
    else if (u > 0.85) ++v;
    return std::clamp(v, lo, hi);
  };
  std::set<std::string> names;
  for (const auto& list : kNames) names.insert(list.begin(), list.end());

  for (const auto& ex : corpus.examples) {
    auto it = hypotheses.find(ex.id);
    if (it == hypotheses.end()) continue;
    const TokenSeq& hyp = it->second;
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < hyp.size(); ++i)
      if (hyp[i] == hyp[i - 1]) ++repeats;
    const bool terminated = !hyp.empty() && hyp.back() == "?";
    const bool readable = hyp.size() >= 3 && repeats <= 1;

    std::set<std::string> doc(ex.document.begin(), ex.document.end());
    std::size_t mentioned = 0, ghosts = 0;
    for (const auto& t : hyp) {
      if (!names.count(t)) continue;
      if (doc.count(t)) ++mentioned;
      else ++ghosts;
    }
    const int base_flu = 5 - static_cast<int>(repeats) - (terminated ? 0 : 1) -
                         (hyp.size() > ex.question.size() + 3 ? 1 : 0);
    const int base_rel = ghosts > 0 ? 1 : (mentioned > 0 ? 3 : 2);
    const int base_ans = (base_rel == 3 && base_flu >= 4) ? 1 : 0;
    const int base_cpx = 1 + (hyp.size() > 6 ? 1 : 0) + (hyp.size() > 9 ? 1 : 0);

    for (std::size_t r = 0; r < raters; ++r) {
      std::ostringstream row;
      if (!readable) {
        row << ex.id << ",1,,,,1";
      } else {
        int ans = base_ans;
        if (rng.uniform() < 0.1) ans = 1 - ans;
        row << ex.id << ',' << jitter(std::max(base_flu, 1), 1, 5) << ',' << jitter(base_rel, 1, 3)
            << ',' << ans << ',' << jitter(base_cpx, 1, 3) << ",1";
      }
      rows.push_back(row.str());
    }
  }
  return rows;
}

}  // namespace qgrl::synthetic
