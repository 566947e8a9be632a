// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/oracles.hpp"
#include "qgrl/rng.hpp"

namespace qgrl {

enum class NegativeKind { kQuestionSwap, kInterDocEntitySwap, kIntraDocEntitySwap };

/// "qswap", "inter", "intra"
std::string_view to_string(NegativeKind kind);
NegativeKind parse_negative_kind(std::string_view text);

/// Entity surface forms by type, collected from corpus annotations.
struct EntityInventory {
  std::map<std::string, std::set<TokenSeq>> by_type;

  static EntityInventory from_corpus(const Corpus& corpus);
  void add(const std::string& type, const TokenSeq& surface);
};

struct NegativeSample {
  Example example;  // source document with the corrupted question
  NegativeKind kind = NegativeKind::kQuestionSwap;
  std::string donor_id;  // question swaps
  TokenSeq replaced;     // entity swaps
  TokenSeq replacement;
};

/// Start offsets of non-overlapping occurrences of `needle` in `hay`,
/// scanning left to right.
std::vector<std::size_t> find_occurrences(const TokenSeq& hay, const TokenSeq& needle);
bool contains_subsequence(const TokenSeq& hay, const TokenSeq& needle);
/// Replaces every occurrence of `from` with `to`.
TokenSeq replace_all(const TokenSeq& tokens, const TokenSeq& from, const TokenSeq& to);

/// The document of corpus.examples[index] paired with the question of a
/// uniformly drawn different example.
NegativeSample make_question_swap(const Corpus& corpus, std::size_t index, Rng& rng);

/// Picks uniformly one question entity (a surface form of a known type) that
/// has same-type inventory entries absent from the document, then replaces
/// all its mentions with one of those entries drawn uniformly. nullopt when
/// nothing qualifies.
std::optional<NegativeSample> make_inter_doc_entity_swap(const Example& example,
                                                         const EntityInventory& inventory,
                                                         Rng& rng);

/// Picks uniformly one document entity mentioned in the question and replaces
/// all its mentions with a different document entity drawn uniformly.
/// nullopt with fewer than two distinct document entities or no mention.
std::optional<NegativeSample> make_intra_doc_entity_swap(const Example& example, Rng& rng);

struct NegativeStats {
  std::size_t positives = 0;
  std::map<std::string, std::size_t> generated;
  std::map<std::string, std::size_t> skipped;
};

struct LabeledExample {
  Example example;
  bool positive = true;
  std::optional<NegativeKind> kind;
};

/// Every gold pair plus one negative of each kind where eligible.
std::vector<LabeledExample> make_relevance_examples(const Corpus& corpus, Rng& rng,
                                                    NegativeStats* stats = nullptr);

/// Corpus record format plus "label" and, for negatives, "negative_kind".
void write_labeled(const Corpus& header, const std::vector<LabeledExample>& items,
                   const std::string& path);
std::vector<LabeledExample> read_labeled(const std::string& path);

std::vector<RelevancePair> to_relevance_pairs(const std::vector<LabeledExample>& items);

}  // namespace qgrl
