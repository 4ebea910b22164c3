#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdrnn/model.hpp"
#include "sdrnn/train.hpp"

namespace sdrnn {

inline constexpr const char* kCheckpointMagic = "SDRNN";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container, little-endian throughout:
//   magic "SDRNN", u32 format version,
//   u32 metadata length + metadata (UTF-8 key=value lines),
//   u32 array count, then per array:
//     u32 name length, name, u32 ndim, u64 dims..., row-major float64 data.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  struct Array {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> data;
  };
  std::vector<Array> arrays;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_net(Net& net, const TrainConfig& cfg);

// Rebuilds the net recorded in the checkpoint; refuses version or dimension
// mismatches.
std::unique_ptr<Net> net_from_checkpoint(const Checkpoint& ck);
TrainConfig train_config_from_checkpoint(const Checkpoint& ck);

}  // namespace sdrnn
