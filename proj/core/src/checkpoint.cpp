// SPDX-License-Identifier: Apache-2.0
#include "qgrl/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "qgrl/error.hpp"

namespace qgrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Q', 'G', 'R', 'L', 'C', 'K', 'P', 'T'};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw CheckpointError("truncated checkpoint " + path);
  return v;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void Checkpoint::store(const nn::ParameterStore& params) {
  arrays.clear();
  for (const auto& p : params) arrays.push_back(Array{p.name, p.value});
}

void Checkpoint::restore(nn::ParameterStore& params) const {
  if (arrays.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(arrays.size()) +
                          " arrays, model expects " + std::to_string(params.size()));
  std::size_t i = 0;
  for (auto& p : params) {
    const Array& a = arrays[i++];
    if (a.name != p.name || a.values.rows() != p.value.rows() || a.values.cols() != p.value.cols())
      throw CheckpointError("checkpoint array '" + a.name + "' does not match parameter '" +
                            p.name + "'");
    p.value = a.values;
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  header["kind"] = ckpt.kind;
  header["format_version"] = Checkpoint::kFormatVersion;
  header["config"] = ckpt.config;
  header["metadata"] = ckpt.metadata;
  header["vocab"] = ckpt.vocab.tokens();
  header["vocab_hash"] = hex64(ckpt.vocab.hash());
  nlohmann::json table = nlohmann::json::array();
  for (const auto& a : ckpt.arrays)
    table.push_back({{"name", a.name}, {"rows", a.values.rows()}, {"cols", a.values.cols()}});
  header["arrays"] = std::move(table);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, Checkpoint::kFormatVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : ckpt.arrays)
    out.write(reinterpret_cast<const char*>(a.values.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(a.values.size())));
  if (!out) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_kind,
                           std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path + " is not a checkpoint");
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != Checkpoint::kFormatVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = read_pod<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len)))
    throw CheckpointError("truncated checkpoint header " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint header in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  if (!expected_kind.empty() && ckpt.kind != expected_kind)
    throw CheckpointError(path + " holds a '" + ckpt.kind + "' model, expected '" + expected_kind +
                          "'");
  ckpt.config = header.at("config");
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  ckpt.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  const std::string stored_hash = header.at("vocab_hash").get<std::string>();
  if (stored_hash != hex64(ckpt.vocab.hash()))
    throw CheckpointError("vocabulary hash mismatch inside " + path);
  if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab.hash())
    throw CheckpointError("vocabulary hash of " + path + " (" + stored_hash +
                          ") differs from the expected " + hex64(*expected_vocab_hash));

  for (const auto& entry : header.at("arrays")) {
    Checkpoint::Array a;
    a.name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<nn::Index>();
    const auto cols = entry.at("cols").get<nn::Index>();
    a.values.resize(rows, cols);
    if (!in.read(reinterpret_cast<char*>(a.values.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rows * cols))))
      throw CheckpointError("truncated array '" + a.name + "' in " + path);
    ckpt.arrays.push_back(std::move(a));
  }
  return ckpt;
}

}  // namespace qgrl
