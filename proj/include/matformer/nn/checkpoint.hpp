#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "matformer/nn/tensor.hpp"

namespace matformer::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contents of a checkpoint file: three JSON records (model config,
/// quantizer bounds, free-form metadata) and named float32 tensors. Optimizer
/// moments are optional.
struct Checkpoint {
  std::string config_json = "{}";
  std::string quantizer_json = "{}";
  std::string meta_json = "{}";
  ParamSet<float> params;
  std::optional<ParamSet<float>> adam_m;
  std::optional<ParamSet<float>> adam_v;
};

/// Binary layout: "MFCK", u32 version, three u32-length-prefixed JSON
/// strings, u32 tensor count, then per tensor: u32 name length, name, u8 dtype
/// (0 = float32), u32 rank, u32 dims, little-endian payload. Written through a
/// temporary file and renamed.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace matformer::nn
