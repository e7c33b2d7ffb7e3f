#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vxseg/model.hpp"

namespace vxseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// VXFM checkpoint, little-endian:
//   magic "VXFM" | u32 version
//   u32 W, w, c, D, h, k, D_ff, L
//   u8 positional | u8 decoder_input | f64 layernorm_eps
//   f64 intensity_center | f64 intensity_scale | u64 seed
//   u32 tensor count, then per tensor in ModelParams::tensors() order:
//     u32 rank | u32 extents[rank] | f64 values
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace vxseg
