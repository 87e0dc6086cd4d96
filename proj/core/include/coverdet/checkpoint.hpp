#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "coverdet/optim.hpp"
#include "coverdet/siamese.hpp"

namespace coverdet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Model file: "CKPT" | u32 version | u32 param count | per parameter
// (u32 name length, name, u32 rank, u32 dims..., f32 values) | u32 CRC32.
std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params);
std::vector<Parameter> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const SiameseModel& model);

/// Layer structure is read back from the parameter shapes; the input height
/// and width are not stored and must be supplied. DimMismatch if they are
/// inconsistent with the first FC layer.
SiameseModel load_checkpoint(const std::filesystem::path& path,
                             std::size_t input_frames = kDefaultInputFrames,
                             std::size_t input_bins = kCqtBins);

ArchitectureConfig infer_architecture(std::span<const Parameter> params,
                                      std::size_t input_frames, std::size_t input_bins);

// Optimizer file, written next to the model as "<model>.adam":
// "ADAM" | u32 version | u64 step | f64 lr, beta1, beta2, eps, l2_lambda |
// u32 count | per parameter (u32 size, f32 m..., f32 v...) | u32 CRC32.
void save_adam_state(const std::filesystem::path& path, const AdamState& state);
AdamState load_adam_state(const std::filesystem::path& path);

}  // namespace coverdet
