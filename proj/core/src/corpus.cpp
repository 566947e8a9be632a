// SPDX-License-Identifier: Apache-2.0
#include "qgrl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "qgrl/error.hpp"

namespace qgrl {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

const std::string kReservedTokens[] = {"<pad>", "<unk>", "<s>", "</s>"};

}  // namespace

bool is_known_tokenizer(std::string_view scheme) {
  return scheme == "ws-punct" || scheme == "whitespace";
}

TokenSeq tokenize(std::string_view text, std::string_view scheme) {
  if (!is_known_tokenizer(scheme))
    throw ConfigError("unknown tokenizer '" + std::string(scheme) + "'");
  if (text.empty()) throw InvalidArgument("tokenize: empty text");
  const bool split_punct = scheme == "ws-punct";
  TokenSeq out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (split_punct && is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TokenSeq Example::entity_tokens(const EntitySpan& e) const {
  return TokenSeq(document.begin() + static_cast<std::ptrdiff_t>(e.start),
                  document.begin() + static_cast<std::ptrdiff_t>(e.end + 1));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kUnspecified: break;
  }
  return "unspecified";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "dev") return Split::kDev;
  if (text == "test") return Split::kTest;
  if (text == "unspecified" || text.empty()) return Split::kUnspecified;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const auto& t : kReservedTokens) add(t);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved) throw CheckpointError("vocabulary lacks reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i)
    if (tokens[i] != kReservedTokens[i])
      throw CheckpointError("vocabulary reserved token mismatch at index " + std::to_string(i));
  Vocabulary v;
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw CheckpointError("duplicate vocabulary token " + tokens[i]);
    v.add(std::move(tokens[i]));
  }
  return v;
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InvalidArgument("vocabulary id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

TokenSeq Vocabulary::decode(std::span<const TokenId> ids) const {
  TokenSeq out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

Vocabulary build_vocab(std::span<const TokenSeq> texts, std::size_t max_size,
                       std::size_t min_freq) {
  struct Stat {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  std::vector<std::string> order;
  Vocabulary reserved;
  for (const auto& text : texts) {
    for (const auto& tok : text) {
      if (reserved.contains(tok)) continue;
      auto [it, inserted] = stats.try_emplace(tok);
      if (inserted) {
        it->second.first = order.size();
        order.push_back(tok);
      }
      ++it->second.count;
    }
  }
  std::vector<const std::string*> ranked;
  for (const auto& tok : order)
    if (stats[tok].count >= std::max<std::size_t>(min_freq, 1)) ranked.push_back(&tok);
  std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string* a, const std::string* b) {
    const Stat& sa = stats[*a];
    const Stat& sb = stats[*b];
    if (sa.count != sb.count) return sa.count > sb.count;
    return sa.first < sb.first;
  });
  std::vector<std::string> tokens(std::begin(kReservedTokens), std::end(kReservedTokens));
  const std::size_t cap = std::max(max_size, Vocabulary::kReserved);
  for (const std::string* t : ranked) {
    if (tokens.size() >= cap) break;
    tokens.push_back(*t);
  }
  return Vocabulary::from_tokens(std::move(tokens));
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_freq) {
  std::vector<TokenSeq> texts;
  texts.reserve(corpus.size() * 2);
  for (const auto& ex : corpus.examples) {
    texts.push_back(ex.document);
    texts.push_back(ex.question);
  }
  return build_vocab(std::span<const TokenSeq>(texts), max_size, min_freq);
}

// ---------------------------------------------------------------------------
// Dataset IO

namespace {

using nlohmann::json;

std::size_t require_index(const json& rec, const char* key, std::size_t line) {
  const json& v = rec.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw IngestionError(std::string("field '") + key + "' must be a non-negative integer", line);
  return v.get<std::size_t>();
}

std::string require_string(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) throw IngestionError(std::string("missing field '") + key + "'", line);
  if (!rec[key].is_string())
    throw IngestionError(std::string("field '") + key + "' must be a string", line);
  return rec[key].get<std::string>();
}

Example parse_record(const json& rec, const Corpus& header, std::size_t line,
                     const LoadOptions& options) {
  if (!rec.is_object()) throw IngestionError("record is not an object", line);
  Example ex;
  ex.id = require_string(rec, "id", line);
  const std::string document = require_string(rec, "document", line);
  const std::string question = require_string(rec, "question", line);
  try {
    ex.document = tokenize(document, header.tokenizer);
    ex.question = tokenize(question, header.tokenizer);
  } catch (const InvalidArgument&) {
    throw IngestionError("document and question must be non-empty", line);
  }
  if (ex.document.empty()) throw IngestionError("document is empty after tokenization", line);
  if (ex.question.empty()) throw IngestionError("question is empty after tokenization", line);

  const std::size_t n = ex.document.size();
  const bool has_start = rec.contains("answer_start");
  const bool has_end = rec.contains("answer_end");
  if (has_start != has_end)
    throw IngestionError(std::string("missing field '") + (has_start ? "answer_end" : "answer_start") +
                             "'",
                         line);
  if (has_start) {
    TokenSpan span{require_index(rec, "answer_start", line), require_index(rec, "answer_end", line)};
    if (span.start > span.end || span.end >= n)
      throw IngestionError("answer span out of document bounds", line);
    ex.answer = span;
  }

  if (rec.contains("entities")) {
    const json& ents = rec["entities"];
    if (!ents.is_array()) throw IngestionError("field 'entities' must be a list", line);
    for (const json& e : ents) {
      if (!e.is_object()) throw IngestionError("entity is not an object", line);
      for (const char* key : {"start", "end", "type"})
        if (!e.contains(key))
          throw IngestionError(std::string("missing field 'entities.") + key + "'", line);
      EntitySpan span{require_index(e, "start", line), require_index(e, "end", line),
                      require_string(e, "type", line)};
      if (span.start > span.end || span.end >= n)
        throw IngestionError("entity span out of document bounds", line);
      if (std::find(header.entity_types.begin(), header.entity_types.end(), span.type) ==
          header.entity_types.end())
        throw IngestionError("entity type '" + span.type + "' not declared in corpus header", line);
      ex.entities.push_back(std::move(span));
    }
    auto sorted = ex.entities;
    std::sort(sorted.begin(), sorted.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].start <= sorted[i - 1].end)
        throw IngestionError("overlapping entity spans", line);
  }

  if (n > options.max_document_length) {
    const std::size_t keep = options.max_document_length;
    ex.document.resize(keep);
    if (ex.answer && ex.answer->end >= keep) ex.answer.reset();
    std::erase_if(ex.entities, [keep](const EntitySpan& e) { return e.end >= keep; });
  }
  return ex;
}

}  // namespace

Corpus read_dataset(std::istream& in, const LoadOptions& options) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  bool seen_record = false;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), is_space)) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw IngestionError(std::string("malformed record: ") + e.what(), line);
    }
    if (rec.is_object() && rec.contains("corpus")) {
      if (seen_record) throw IngestionError("corpus header must precede records", line);
      const json& h = rec["corpus"];
      if (!h.is_object()) throw IngestionError("corpus header must be an object", line);
      try {
        corpus.tokenizer = h.value("tokenizer", std::string(kDefaultTokenizer));
        corpus.entity_types = h.value("entity_types", std::vector<std::string>{});
        corpus.split = parse_split(h.value("split", std::string("unspecified")));
      } catch (const json::exception& e) {
        throw IngestionError(std::string("bad corpus header: ") + e.what(), line);
      } catch (const ConfigError& e) {
        throw IngestionError(e.what(), line);
      }
      if (!is_known_tokenizer(corpus.tokenizer))
        throw IngestionError("unknown tokenizer '" + corpus.tokenizer + "'", line);
      continue;
    }
    seen_record = true;
    Example ex;
    try {
      ex = parse_record(rec, corpus, line, options);
    } catch (const json::exception& e) {
      throw IngestionError(std::string("malformed record: ") + e.what(), line);
    }
    if (!ids.insert(ex.id).second) throw IngestionError("duplicate id '" + ex.id + "'", line);
    if (options.on_record) options.on_record(rec, line);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

Corpus load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path);
  return read_dataset(in, options);
}

json corpus_header(const Corpus& corpus) {
  return {{"corpus",
           {{"tokenizer", corpus.tokenizer},
            {"entity_types", corpus.entity_types},
            {"split", std::string(to_string(corpus.split))}}}};
}

json to_record(const Example& ex) {
  json rec;
  rec["id"] = ex.id;
  rec["document"] = detokenize(ex.document);
  rec["question"] = detokenize(ex.question);
  if (ex.answer) {
    rec["answer_start"] = ex.answer->start;
    rec["answer_end"] = ex.answer->end;
  }
  if (!ex.entities.empty()) {
    json ents = json::array();
    for (const auto& e : ex.entities)
      ents.push_back({{"start", e.start}, {"end", e.end}, {"type", e.type}});
    rec["entities"] = std::move(ents);
  }
  return rec;
}

void write_dataset(const Corpus& corpus, std::ostream& out) {
  out << corpus_header(corpus).dump() << '\n';
  for (const auto& ex : corpus.examples) out << to_record(ex).dump() << '\n';
}

void write_dataset(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset " + path);
  write_dataset(corpus, out);
}

}  // namespace qgrl
