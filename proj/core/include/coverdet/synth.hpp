#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coverdet/audio.hpp"
#include "coverdet/dataset.hpp"
#include "coverdet/random.hpp"

namespace coverdet {

struct Timbre {
  std::vector<double> harmonics;  // amplitude of partial h+1
  double decay_per_second = 3.0;
};

struct Note {
  int midi = 60;
  double beats = 1.0;
};

/// A song's identity: what every version of it shares.
struct Melody {
  std::vector<Note> notes;
  double tempo_bpm = 120.0;
  Timbre timbre;
};

/// How one version departs from the song.
struct VersionParams {
  int transpose = 0;          // semitones
  double tempo_scale = 1.0;   // > 1 plays faster
  double gain = 1.0;
  double velocity_jitter = 0.0;  // per-note amplitude spread, fraction
  double noise_level = 0.0;      // white-noise standard deviation
  std::uint64_t seed = 0;        // drives jitter and noise
};

/// 16-32 notes of a random key's major or minor scale, 90-140 BPM, random
/// harmonic profile and decay.
Melody random_melody(Rng& rng);

/// Transposition in [-5, +6], tempo scale in [0.8, 1.25], gain in [0.6, 1],
/// velocity jitter up to 20 %, light noise.
VersionParams random_version(Rng& rng);

/// Renders the melody (looped to fill `duration_seconds`) as a sum of decaying
/// harmonic tones. Before gain the rendering peaks at 0.8.
AudioClip render_melody(const Melody& melody, const VersionParams& version,
                        double duration_seconds, int sample_rate_hz = kCanonicalSampleRate);

struct SynthConfig {
  std::size_t n_cliques = 32;
  std::size_t versions_per_clique = 4;
  std::uint64_t seed = 7;
  double duration_seconds = 30.0;
  int sample_rate_hz = kCanonicalSampleRate;
  std::size_t workers = 0;

  void validate() const;
};

struct SynthTrack {
  std::string clique_id;
  std::string track_id;
  AudioClip clip;
};

/// All versions of all cliques, in clique order. Clique c draws from
/// derive_seed(seed, c), so the output does not depend on scheduling.
std::vector<SynthTrack> synthesize_tracks(const SynthConfig& config);

/// Writes "<out>/audio/<track_id>.wav" and "<out>/manifest.txt" (paths in
/// the manifest are relative to <out>). Returns the clique set written.
CliqueSet synthesize_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace coverdet
