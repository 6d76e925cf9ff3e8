#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hoi/common.hpp"
#include "hoi/nn.hpp"

namespace hoi::ckpt {

// Named-tensor container with free-form JSON metadata. The on-disk format is
// a fixed 8-byte magic, a little-endian u64 header length, a JSON header
// (metadata plus the tensor table), and a packed float32 little-endian blob.
// Only parameter values are stored, not optimizer state.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Snapshot parameter values into a checkpoint / restore them by name.
// Loading requires an exact name and shape match in both directions.
Checkpoint snapshot_params(const std::vector<nn::Param*>& params, nlohmann::json meta);
void restore_params(const Checkpoint& ckpt, const std::vector<nn::Param*>& params);

}  // namespace hoi::ckpt
