#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coverdet/cqt.hpp"
#include "coverdet/dataset.hpp"
#include "coverdet/eval.hpp"
#include "coverdet/siamese.hpp"

namespace coverdet {

/// "<dir>/<track_id>.cqt"
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& track_id);

/// Crop seed used whenever a track is viewed outside training, so every
/// stage sees the same window of a long spectrogram.
std::uint64_t fixed_crop_seed(const std::string& track_id);

/// crop_or_pad with fixed_crop_seed(spec.source_id).
CqtSpectrogram fixed_view(const CqtSpectrogram& spec, std::size_t frames);

/// Spectrograms keyed by track id.
class FeatureStore {
 public:
  /// Loads every track of `cliques` from `dir`; MissingFeature names the
  /// first track without a feature file.
  static FeatureStore load(const std::filesystem::path& dir, const CliqueSet& cliques);

  void insert(CqtSpectrogram spec);
  /// Throws MissingFeature.
  const CqtSpectrogram& at(const std::string& track_id) const;
  bool contains(const std::string& track_id) const { return specs_.contains(track_id); }
  std::size_t size() const { return specs_.size(); }

 private:
  std::map<std::string, CqtSpectrogram> specs_;
};

struct ExtractOptions {
  int hop_samples = kDefaultHopSamples;
  int sample_rate_hz = kCanonicalSampleRate;
  std::size_t frames = kDefaultInputFrames;  // 0 keeps the full length
  std::size_t workers = 0;
};

/// Computes and caches features for every *.wav in `wav_dir` (sorted by
/// name); the track id is the file stem. Returns the ids written.
std::vector<std::string> extract_directory(const std::filesystem::path& wav_dir,
                                           const std::filesystem::path& feature_dir,
                                           const ExtractOptions& options = {});

/// CQT of a clip, cut to `options.frames` with the track's fixed crop.
CqtSpectrogram extract_features(const AudioClip& clip, const CqtKernel& kernel,
                                std::size_t frames);

/// Inference-mode embeddings (dropout off) for `track_ids`, each viewed
/// through fixed_view at the model's input width.
EmbeddingIndex build_index(const SiameseModel& model, const FeatureStore& features,
                           std::span<const std::string> track_ids, std::size_t workers = 0);

/// Track ids of a clique set, sorted.
std::vector<std::string> track_ids(const CliqueSet& cliques);

}  // namespace coverdet
