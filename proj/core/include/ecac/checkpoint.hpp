#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ecac/array.hpp"

namespace ecac {

// Versioned binary container of named f64 tensors plus string metadata.
//
// Layout (little-endian):
//   "ECACCKPT" | u32 version
//   u64 tensor_count, then per tensor: u32 name_len | name | u32 rank | u64 dims[rank] | f64 values[]
//   u64 meta_count, then per entry:    u32 key_len  | key  | u64 value_len | value
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, Array> tensors;
  std::map<std::string, std::string> meta;

  const Array& tensor(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointVersionError on a version mismatch and IoError on malformed data.
Checkpoint decode_checkpoint(const std::string& bytes);

// Writes through a temporary file and renames, so an existing file is only
// replaced by a complete checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ecac
