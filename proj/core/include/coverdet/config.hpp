#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "coverdet/siamese.hpp"
#include "coverdet/train.hpp"

namespace coverdet {

using KeyValues = std::map<std::string, std::string, std::less<>>;

/// `key = value` lines; '#' starts a comment; blank lines ignored.
KeyValues parse_key_values(std::string_view text, std::string_view origin = "config");
KeyValues load_key_values(const std::filesystem::path& path);

/// Everything a pipeline run needs besides file paths.
struct PipelineConfig {
  TrainConfig train;
  ArchitectureConfig arch;
  std::uint64_t seed = 42;
  std::size_t holdout = 1000;
  bool split_by_clique = false;
  int hop_samples = kDefaultHopSamples;
  int sample_rate_hz = kCanonicalSampleRate;
};

/// Applies overrides. Keys: batch_size, epochs, dropout_rate, l2_lambda, lr,
/// seed, eval_batch_size, holdout, split_by_clique, conv_layers
/// ("64x5x5,32x3x3"), fc_widths ("128,64"), input_frames, input_bins,
/// alpha_init, hop, sample_rate. Unknown keys and unparsable values throw
/// InvalidParam.
void apply_overrides(const KeyValues& values, PipelineConfig& config);

std::string format_conv_layers(const std::vector<ConvLayerSpec>& layers);

}  // namespace coverdet
