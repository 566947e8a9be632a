// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/rng.hpp"

namespace qgrl::synthetic {

/// Templated fact world: four relations over PER/ORG/LOC/WORK/YEAR entities,
/// three seven-token question templates per relation, each question carrying exactly one
/// entity and a one-token answer span in the document.
struct Options {
  std::size_t names_per_type = 20;   // <= 20
  std::size_t facts_per_document = 3;  // distinct relations per document, <= 4
  double filler_probability = 0.5;
};

const std::vector<std::string>& entity_types();

/// Generates `count` examples with ids "<prefix>-<n>".
Corpus generate(std::size_t count, Split split, const std::string& id_prefix, Rng& rng,
                const Options& options = {});

/// H(question | document) in nats: the generator picks a fact uniformly and a
/// template uniformly, and every such choice yields a distinct string.
double conditional_question_entropy(const Options& options = {});

/// H(question) in nats, marginalising over documents.
double marginal_question_entropy(const Options& options = {});

/// exp(total entropy / total predicted tokens) over `corpus`, counting the
/// end-of-sequence token once per question.
double perplexity_bound(const Corpus& corpus, double entropy_per_question);

/// Simulated raters for generated questions. One CSV row per rater in the
/// ratings-file format; relevance etc. are left empty for unreadable output.
std::vector<std::string> simulate_ratings(const Corpus& corpus,
                                          const std::map<std::string, TokenSeq>& hypotheses,
                                          std::size_t raters, Rng& rng);

}  // namespace qgrl::synthetic
