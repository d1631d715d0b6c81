#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsinet/nn.hpp"
#include "rsinet/tensor.hpp"

namespace rsinet {

// Versioned binary container: magic "RSIN", format version, a JSON config
// snapshot, then named little-endian float64 tensor tables for parameters
// and optimizer moments. Round-trips byte-exactly.
inline constexpr char kCheckpointMagic[4] = {'R', 'S', 'I', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;  // TrainConfig snapshot
  std::vector<std::pair<std::string, Tensor>> tensors;
  AdamState adam;
  std::uint64_t iteration = 0;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into the registry; the name sets must match.
void restore_params(ParamRegistry& params, const Checkpoint& cp);
Checkpoint snapshot(const ParamRegistry& params, const std::string& config_json,
                    const AdamState& adam, std::uint64_t iteration,
                    const std::string& rng_state);

}  // namespace rsinet
