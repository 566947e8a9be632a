// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qgrl/corpus.hpp"
#include "qgrl/nn/graph.hpp"

namespace qgrl {

/// Versioned model container shared by the generator and all oracles.
///
/// Layout: the 8-byte magic "QGRLCKPT", a little-endian u32 format version,
/// a u64 header length, a JSON header (kind, config, metadata, vocabulary and
/// its hash, array table), then every array as column-major float64.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  struct Array {
    std::string name;
    nn::Matrix values;
  };

  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  Vocabulary vocab;
  std::vector<Array> arrays;

  void store(const nn::ParameterStore& params);
  /// Copies arrays into a store of identical layout.
  void restore(nn::ParameterStore& params) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Loads and verifies the embedded vocabulary hash. When `expected_vocab_hash`
/// is given it must match as well. `expected_kind` guards against loading the
/// wrong model type.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_kind,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

std::string hex64(std::uint64_t v);

}  // namespace qgrl
