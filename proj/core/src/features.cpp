#include "coverdet/features.hpp"

#include <algorithm>

#include "coverdet/error.hpp"
#include "coverdet/parallel.hpp"
#include "coverdet/random.hpp"

namespace coverdet {

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& track_id) {
  return dir / (track_id + ".cqt");
}

std::uint64_t fixed_crop_seed(const std::string& track_id) {
  return derive_seed(0x636f766572646574ULL, track_id);
}

CqtSpectrogram fixed_view(const CqtSpectrogram& spec, std::size_t frames) {
  if (spec.n_frames == frames) return spec;
  return crop_or_pad(spec, frames, fixed_crop_seed(spec.source_id));
}

FeatureStore FeatureStore::load(const std::filesystem::path& dir, const CliqueSet& cliques) {
  FeatureStore store;
  for (const auto& id : track_ids(cliques)) {
    const auto path = feature_path(dir, id);
    if (!std::filesystem::exists(path)) {
      fail(ErrorCode::kMissingFeature, "no feature file for track " + id + " (" + path.string() + ")");
    }
    store.insert(load_cqt(path));
  }
  return store;
}

void FeatureStore::insert(CqtSpectrogram spec) {
  auto id = spec.source_id;
  specs_.insert_or_assign(std::move(id), std::move(spec));
}

const CqtSpectrogram& FeatureStore::at(const std::string& track_id) const {
  const auto it = specs_.find(track_id);
  if (it == specs_.end()) fail(ErrorCode::kMissingFeature, "no features for track " + track_id);
  return it->second;
}

CqtSpectrogram extract_features(const AudioClip& clip, const CqtKernel& kernel,
                                std::size_t frames) {
  auto spec = compute_cqt(clip, kernel);
  if (frames > 0) spec = fixed_view(spec, frames);
  return spec;
}

std::vector<std::string> extract_directory(const std::filesystem::path& wav_dir,
                                           const std::filesystem::path& feature_dir,
                                           const ExtractOptions& options) {
  std::error_code ec;
  if (!std::filesystem::is_directory(wav_dir, ec)) {
    fail(ErrorCode::kIoFailure, "input directory " + wav_dir.string() + " does not exist");
  }
  std::filesystem::create_directories(feature_dir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + feature_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> inputs;
  for (const auto& entry : std::filesystem::directory_iterator(wav_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      inputs.push_back(entry.path());
    }
  }
  std::sort(inputs.begin(), inputs.end());

  CqtParams params;
  params.hop_samples = options.hop_samples;
  const CqtKernel kernel(params, options.sample_rate_hz);
  parallel_for(
      inputs.size(),
      [&](std::size_t i) {
        const auto clip = load_wav(inputs[i], options.sample_rate_hz);
        save_cqt(extract_features(clip, kernel, options.frames),
                 feature_path(feature_dir, clip.source_id));
      },
      options.workers);

  std::vector<std::string> ids;
  for (const auto& p : inputs) ids.push_back(p.stem().string());
  return ids;
}

EmbeddingIndex build_index(const SiameseModel& model, const FeatureStore& features,
                           std::span<const std::string> ids, std::size_t workers) {
  const std::size_t frames = model.config().input_frames;
  std::vector<std::vector<float>> vectors(ids.size());
  parallel_for(
      ids.size(),
      [&](std::size_t i) {
        const auto view = fixed_view(features.at(ids[i]), frames);
        const auto emb = model.embed(spectrogram_input<float>(view));
        vectors[i].assign(emb.values().begin(), emb.values().end());
      },
      workers);
  EmbeddingIndex index(model.config().embedding_dim());
  for (std::size_t i = 0; i < ids.size(); ++i) index.insert(ids[i], std::move(vectors[i]));
  return index;
}

std::vector<std::string> track_ids(const CliqueSet& cliques) {
  std::vector<std::string> ids;
  for (const auto& c : cliques.cliques()) {
    for (const auto& t : c.tracks) ids.push_back(t.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace coverdet
