#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hgmts/parameters.hpp"

namespace hgmts {

/// Binary checkpoint layout (all integers and doubles little-endian):
///
///   magic      8 bytes  "HGMTSCK1"
///   hash       u64      FNV-1a of the canonical config text
///   cfg_len    u64, then cfg_len bytes of config text
///   count      u64
///   count x { name_len u64, name bytes, rank u64, rank x u64 dims, f64 values }
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::string config_text;
  std::vector<Parameter> params;
};

std::uint64_t fnv1a64(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& config_text);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `params`. Every parameter of the store must
/// be present with the same shape, and the hash must match `config_text`.
void load_parameters(const Checkpoint& ckpt, ParameterStore& params, const std::string& config_text);

}  // namespace hgmts
