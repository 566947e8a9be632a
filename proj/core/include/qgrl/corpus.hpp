// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qgrl {

using TokenSeq = std::vector<std::string>;
using TokenId = std::int32_t;

inline constexpr std::string_view kDefaultTokenizer = "ws-punct";
inline constexpr std::size_t kMaxInputLength = 256;

/// Splits text into tokens.
///   "ws-punct"   - whitespace split, then every ASCII punctuation character
///                  becomes its own token ("Who wrote it?" -> Who|wrote|it|?)
///   "whitespace" - whitespace split only
/// Throws ConfigError for other ids and InvalidArgument for empty text.
TokenSeq tokenize(std::string_view text, std::string_view scheme = kDefaultTokenizer);

/// Joins with single spaces. tokenize(detokenize(t), s) == t for any t that
/// tokenize(., s) produced.
std::string detokenize(std::span<const std::string> tokens);

bool is_known_tokenizer(std::string_view scheme);

/// Inclusive token range [start, end].
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
  bool operator==(const EntitySpan&) const = default;
};

struct Example {
  std::string id;
  TokenSeq document;
  TokenSeq question;
  std::optional<TokenSpan> answer;
  std::vector<EntitySpan> entities;

  TokenSeq entity_tokens(const EntitySpan& e) const;
  bool operator==(const Example&) const = default;
};

enum class Split { kUnspecified, kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Corpus {
  Split split = Split::kUnspecified;
  std::string tokenizer{kDefaultTokenizer};
  std::vector<std::string> entity_types;
  std::vector<Example> examples;

  bool empty() const { return examples.empty(); }
  std::size_t size() const { return examples.size(); }
  bool operator==(const Corpus&) const = default;
};

/// Token <-> index map. Ids 0..3 are always <pad>, <unk>, <s>, </s>.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  /// Rebuilds from a full token list; the reserved tokens must lead it.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  TokenSeq decode(std::span<const TokenId> ids) const;

  /// FNV-1a over the ordered token list.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// The reserved tokens plus the most frequent document/question tokens with
/// count >= min_freq, in descending frequency with ties broken by first
/// occurrence, truncated so that size() <= max(max_size, 4).
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_freq);
Vocabulary build_vocab(std::span<const TokenSeq> texts, std::size_t max_size,
                       std::size_t min_freq);

struct LoadOptions {
  std::size_t max_document_length = kMaxInputLength;
  /// Sees every raw record after it parsed cleanly; lets formats that extend
  /// the record read their extra keys.
  std::function<void(const nlohmann::json& record, std::size_t line)> on_record;
};

/// Reads the line-delimited dataset format: an optional leading header
///   {"corpus": {"tokenizer": "...", "entity_types": [...], "split": "train"}}
/// followed by one record per line
///   {"id", "document", "question", "answer_start"?, "answer_end"?,
///    "entities"?: [{"start", "end", "type"}]}
/// with token indices inclusive. Documents longer than max_document_length
/// are truncated from the right; annotations past the cut are dropped.
Corpus load_dataset(const std::string& path, const LoadOptions& options = {});
Corpus read_dataset(std::istream& in, const LoadOptions& options = {});

/// One dataset record (without trailing newline handling).
nlohmann::json to_record(const Example& example);
nlohmann::json corpus_header(const Corpus& corpus);

void write_dataset(const Corpus& corpus, const std::string& path);
void write_dataset(const Corpus& corpus, std::ostream& out);

}  // namespace qgrl
