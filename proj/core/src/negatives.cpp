// SPDX-License-Identifier: Apache-2.0
#include "qgrl/negatives.hpp"

#include <algorithm>
#include <fstream>

#include "qgrl/error.hpp"

namespace qgrl {

std::string_view to_string(NegativeKind kind) {
  switch (kind) {
    case NegativeKind::kQuestionSwap: return "qswap";
    case NegativeKind::kInterDocEntitySwap: return "inter";
    case NegativeKind::kIntraDocEntitySwap: return "intra";
  }
  return "qswap";
}

NegativeKind parse_negative_kind(std::string_view text) {
  if (text == "qswap") return NegativeKind::kQuestionSwap;
  if (text == "inter") return NegativeKind::kInterDocEntitySwap;
  if (text == "intra") return NegativeKind::kIntraDocEntitySwap;
  throw InvalidArgument("unknown negative kind '" + std::string(text) + "'");
}

void EntityInventory::add(const std::string& type, const TokenSeq& surface) {
  if (!surface.empty()) by_type[type].insert(surface);
}

EntityInventory EntityInventory::from_corpus(const Corpus& corpus) {
  EntityInventory inv;
  for (const auto& ex : corpus.examples)
    for (const auto& e : ex.entities) inv.add(e.type, ex.entity_tokens(e));
  return inv;
}

std::vector<std::size_t> find_occurrences(const TokenSeq& hay, const TokenSeq& needle) {
  std::vector<std::size_t> out;
  if (needle.empty() || needle.size() > hay.size()) return out;
  for (std::size_t i = 0; i + needle.size() <= hay.size();) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
      out.push_back(i);
      i += needle.size();
    } else {
      ++i;
    }
  }
  return out;
}

bool contains_subsequence(const TokenSeq& hay, const TokenSeq& needle) {
  return !find_occurrences(hay, needle).empty();
}

TokenSeq replace_all(const TokenSeq& tokens, const TokenSeq& from, const TokenSeq& to) {
  TokenSeq out;
  std::size_t i = 0;
  for (std::size_t pos : find_occurrences(tokens, from)) {
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i),
               tokens.begin() + static_cast<std::ptrdiff_t>(pos));
    out.insert(out.end(), to.begin(), to.end());
    i = pos + from.size();
  }
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.end());
  return out;
}

namespace {

Example corrupted(const Example& source, TokenSeq question, NegativeKind kind) {
  Example ex;
  ex.id = source.id + "#" + std::string(to_string(kind));
  ex.document = source.document;
  ex.question = std::move(question);
  ex.entities = source.entities;
  return ex;
}

}  // namespace

NegativeSample make_question_swap(const Corpus& corpus, std::size_t index, Rng& rng) {
  if (corpus.size() < 2) throw InvalidArgument("question swap needs at least two examples");
  if (index >= corpus.size()) throw InvalidArgument("question swap: index out of range");
  std::size_t donor = rng.index(corpus.size() - 1);
  if (donor >= index) ++donor;
  const Example& src = corpus.examples[index];
  NegativeSample s;
  s.kind = NegativeKind::kQuestionSwap;
  s.donor_id = corpus.examples[donor].id;
  s.example = corrupted(src, corpus.examples[donor].question, s.kind);
  return s;
}

std::optional<NegativeSample> make_inter_doc_entity_swap(const Example& example,
                                                         const EntityInventory& inventory,
                                                         Rng& rng) {
  struct Option {
    const TokenSeq* mention;
    std::vector<const TokenSeq*> candidates;
  };
  std::vector<Option> options;
  for (const auto& [type, surfaces] : inventory.by_type) {
    for (const auto& mention : surfaces) {
      if (!contains_subsequence(example.question, mention)) continue;
      Option opt{&mention, {}};
      for (const auto& cand : surfaces)
        if (cand != mention && !contains_subsequence(example.document, cand))
          opt.candidates.push_back(&cand);
      if (!opt.candidates.empty()) options.push_back(std::move(opt));
    }
  }
  if (options.empty()) return std::nullopt;
  const Option& chosen = options[rng.index(options.size())];
  const TokenSeq& replacement = *chosen.candidates[rng.index(chosen.candidates.size())];
  NegativeSample s;
  s.kind = NegativeKind::kInterDocEntitySwap;
  s.replaced = *chosen.mention;
  s.replacement = replacement;
  s.example = corrupted(example, replace_all(example.question, s.replaced, replacement), s.kind);
  return s;
}

std::optional<NegativeSample> make_intra_doc_entity_swap(const Example& example, Rng& rng) {
  std::vector<TokenSeq> surfaces;
  for (const auto& e : example.entities) {
    TokenSeq t = example.entity_tokens(e);
    if (std::find(surfaces.begin(), surfaces.end(), t) == surfaces.end())
      surfaces.push_back(std::move(t));
  }
  if (surfaces.size() < 2) return std::nullopt;
  std::vector<std::size_t> mentioned;
  for (std::size_t i = 0; i < surfaces.size(); ++i)
    if (contains_subsequence(example.question, surfaces[i])) mentioned.push_back(i);
  if (mentioned.empty()) return std::nullopt;
  const std::size_t m = mentioned[rng.index(mentioned.size())];
  std::size_t r = rng.index(surfaces.size() - 1);
  if (r >= m) ++r;
  NegativeSample s;
  s.kind = NegativeKind::kIntraDocEntitySwap;
  s.replaced = surfaces[m];
  s.replacement = surfaces[r];
  s.example = corrupted(example, replace_all(example.question, s.replaced, s.replacement), s.kind);
  return s;
}

std::vector<LabeledExample> make_relevance_examples(const Corpus& corpus, Rng& rng,
                                                    NegativeStats* stats) {
  NegativeStats local;
  NegativeStats& st = stats ? *stats : local;
  const EntityInventory inventory = EntityInventory::from_corpus(corpus);
  std::vector<LabeledExample> out;
  auto note = [&](NegativeKind kind, bool made) {
    ++(made ? st.generated : st.skipped)[std::string(to_string(kind))];
  };
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Example& ex = corpus.examples[i];
    out.push_back(LabeledExample{ex, true, std::nullopt});
    ++st.positives;
    if (corpus.size() >= 2) {
      auto s = make_question_swap(corpus, i, rng);
      out.push_back(LabeledExample{std::move(s.example), false, s.kind});
      note(NegativeKind::kQuestionSwap, true);
    } else {
      note(NegativeKind::kQuestionSwap, false);
    }
    auto inter = make_inter_doc_entity_swap(ex, inventory, rng);
    note(NegativeKind::kInterDocEntitySwap, inter.has_value());
    if (inter) out.push_back(LabeledExample{std::move(inter->example), false, inter->kind});
    auto intra = make_intra_doc_entity_swap(ex, rng);
    note(NegativeKind::kIntraDocEntitySwap, intra.has_value());
    if (intra) out.push_back(LabeledExample{std::move(intra->example), false, intra->kind});
  }
  return out;
}

void write_labeled(const Corpus& header, const std::vector<LabeledExample>& items,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << corpus_header(header).dump() << '\n';
  for (const auto& item : items) {
    nlohmann::json rec = to_record(item.example);
    rec["label"] = item.positive ? "positive" : "negative";
    if (item.kind) rec["negative_kind"] = std::string(to_string(*item.kind));
    out << rec.dump() << '\n';
  }
}

std::vector<LabeledExample> read_labeled(const std::string& path) {
  struct Label {
    bool positive;
    std::optional<NegativeKind> kind;
  };
  std::vector<Label> labels;
  LoadOptions opts;
  opts.on_record = [&labels](const nlohmann::json& rec, std::size_t line) {
    if (!rec.contains("label") || !rec["label"].is_string())
      throw IngestionError("missing field 'label'", line);
    const std::string label = rec["label"].get<std::string>();
    if (label != "positive" && label != "negative")
      throw IngestionError("label must be 'positive' or 'negative'", line);
    Label l{label == "positive", std::nullopt};
    if (rec.contains("negative_kind")) {
      try {
        l.kind = parse_negative_kind(rec["negative_kind"].get<std::string>());
      } catch (const std::exception& e) {
        throw IngestionError(e.what(), line);
      }
    }
    if (!l.positive && !l.kind) throw IngestionError("missing field 'negative_kind'", line);
    labels.push_back(l);
  };
  Corpus corpus = load_dataset(path, opts);
  std::vector<LabeledExample> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    out.push_back(LabeledExample{std::move(corpus.examples[i]), labels[i].positive, labels[i].kind});
  return out;
}

std::vector<RelevancePair> to_relevance_pairs(const std::vector<LabeledExample>& items) {
  std::vector<RelevancePair> out;
  out.reserve(items.size());
  for (const auto& item : items)
    out.push_back(RelevancePair{item.example.document, item.example.question, item.positive});
  return out;
}

}  // namespace qgrl
