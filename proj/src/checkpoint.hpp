#ifndef CIRN_CHECKPOINT_HPP
#define CIRN_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tensor.hpp"

namespace cirn {

// Single-file checkpoint: fixed header (magic "CIRN", u32 version,
// length-prefixed UTF-8 JSON metadata), then per-tensor records
// (u32 name length, name, u32 rank, u64 extents, little-endian f32 data).
constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensorF32 {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct CheckpointData {
  nlohmann::json meta;
  std::vector<NamedTensorF32> tensors;
};

// Writes to a temporary file and renames; a failed save never leaves a
// partial checkpoint behind.
void save_checkpoint(const std::string& path, const CheckpointData& ckpt);

// Throws FormatError on version/magic mismatch or truncation.
CheckpointData load_checkpoint(const std::string& path);

}  // namespace cirn

#endif
