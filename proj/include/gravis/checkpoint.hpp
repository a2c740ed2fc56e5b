#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gravis/encoder.hpp"

namespace gravis {

// On-disk tensor snapshot. Layout, all little-endian:
//   "GRVS" | u32 version | u32 tensor count | per tensor:
//   u32 name length | name bytes | u32 rank | u64 dims... | f32 values...
struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  bool operator==(const NamedTensor&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path);

// Throws CorruptCheckpoint (bad magic, truncation, inconsistent sizes) or
// VersionMismatch.
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Encoder+optimizer snapshot glue. Parameter tensors are stored under
// "param/", velocities under "velocity/", scalar knobs and the encoder
// shape under "opt/" and "config/".
std::vector<NamedTensor> encoder_state_to_tensors(
    const EncoderParams<float>& params, const OptimizerState<float>& state);

struct EncoderSnapshot {
  EncoderParams<float> params;
  OptimizerState<float> state;
};

EncoderSnapshot encoder_state_from_tensors(const std::vector<NamedTensor>& tensors);

}  // namespace gravis
