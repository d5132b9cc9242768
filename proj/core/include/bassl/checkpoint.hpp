#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bassl {

// Raw view of a checkpoint file: a JSON config blob plus named f32 tensors.
// The typed wrappers in crn.hpp convert these to parameter stores.

struct RawTensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<float> data;
};

struct RawCheckpoint {
  uint8_t version = 1;
  std::string config_json;
  std::vector<RawTensor> tensors;
};

void write_checkpoint_file(const std::filesystem::path& path, const RawCheckpoint& ckpt);
RawCheckpoint read_checkpoint_file(const std::filesystem::path& path);

}  // namespace bassl
