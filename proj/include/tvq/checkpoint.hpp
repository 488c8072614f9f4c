#pragma once

#include "tvq/nn.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tvq {

/// Versioned binary container: magic, version, stage id, JSON metadata
/// (configs, hashes, normalization stats, training progress), and named
/// double tensors stored as raw little-endian payloads so a save/load/save
/// round trip is byte-identical.
struct Checkpoint {
  static constexpr char kMagic[8] = {'T', 'V', 'Q', 'C', 'K', 'P', 'T', '1'};
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t stage = 0;  // 1 = tokenizer, 2 = prior, 3 = fcn
  nlohmann::json meta;
  std::vector<std::pair<std::string, XMat>> tensors;

  const XMat& tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

/// Copy registry values (params and buffers) into a named tensor list.
std::vector<std::pair<std::string, XMat>> snapshot_registry(const nn::Registry& r);

/// Write tensors back into a registry by name; throws on missing names or
/// shape mismatches. Extra tensors (optimizer state) are ignored.
void restore_registry(nn::Registry& r, const std::vector<std::pair<std::string, XMat>>& tensors);

/// Append AdamW state under reserved "adam." names plus meta fields.
void append_optimizer_state(Checkpoint& c, const nn::AdamW& opt);
/// Restore AdamW state if present; returns true when found.
bool restore_optimizer_state(const Checkpoint& c, nn::AdamW& opt);

}  // namespace tvq
