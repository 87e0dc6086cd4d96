#include "coverdet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "coverdet/error.hpp"
#include "coverdet/parallel.hpp"

namespace coverdet {
namespace {

constexpr std::array<int, 7> kMajor{0, 2, 4, 5, 7, 9, 11};
constexpr std::array<int, 7> kMinor{0, 2, 3, 5, 7, 8, 10};
constexpr double kAttackSeconds = 0.01;
constexpr double kReleaseSeconds = 0.03;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double midi_to_hz(double midi) { return 440.0 * std::exp2((midi - 69.0) / 12.0); }

std::string two_digits(std::size_t v, std::size_t width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", static_cast<int>(width), v);
  return buf;
}

}  // namespace

Melody random_melody(Rng& rng) {
  Melody melody;
  const int root = uniform_int(rng, 45, 57);
  const auto& scale = uniform_int(rng, 0, 1) == 0 ? kMajor : kMinor;
  const int n_notes = uniform_int(rng, 16, 32);
  constexpr std::array<double, 6> kDurations{0.5, 0.5, 1.0, 1.0, 1.5, 2.0};

  int degree = uniform_int(rng, 3, 10);
  for (int i = 0; i < n_notes; ++i) {
    // Mostly stepwise motion with occasional leaps, kept within two octaves.
    const int step = uniform_int(rng, 0, 9) < 7 ? uniform_int(rng, -2, 2) : uniform_int(rng, -5, 5);
    degree = std::clamp(degree + step, 0, 14);
    const int midi = root + 12 * (degree / 7) + scale[static_cast<std::size_t>(degree % 7)];
    const double beats = kDurations[static_cast<std::size_t>(uniform_int(rng, 0, 5))];
    melody.notes.push_back({midi, beats});
  }
  melody.tempo_bpm = uniform(rng, 90.0, 140.0);

  const int n_harmonics = uniform_int(rng, 3, 6);
  const double rolloff = uniform(rng, 0.35, 0.8);
  for (int h = 0; h < n_harmonics; ++h) {
    melody.timbre.harmonics.push_back(std::pow(rolloff, h) * uniform(rng, 0.7, 1.0));
  }
  melody.timbre.decay_per_second = uniform(rng, 1.5, 5.0);
  return melody;
}

VersionParams random_version(Rng& rng) {
  VersionParams v;
  v.transpose = uniform_int(rng, -5, 6);
  v.tempo_scale = std::exp(uniform(rng, std::log(0.8), std::log(1.25)));
  v.gain = uniform(rng, 0.6, 1.0);
  v.velocity_jitter = uniform(rng, 0.0, 0.2);
  v.noise_level = uniform(rng, 0.002, 0.01);
  v.seed = rng();
  return v;
}

AudioClip render_melody(const Melody& melody, const VersionParams& version,
                        double duration_seconds, int sample_rate_hz) {
  if (melody.notes.empty() || !(version.tempo_scale > 0.0) || !(melody.tempo_bpm > 0.0)) {
    fail(ErrorCode::kInvalidParam, "melody needs notes and a positive tempo");
  }
  const auto n_samples = static_cast<std::size_t>(std::llround(duration_seconds * sample_rate_hz));
  std::vector<double> buffer(n_samples, 0.0);
  Rng rng(version.seed);
  const double seconds_per_beat = 60.0 / (melody.tempo_bpm * version.tempo_scale);
  const double nyquist = 0.5 * sample_rate_hz;

  double start = 0.0;
  for (std::size_t i = 0; start < duration_seconds; i = (i + 1) % melody.notes.size()) {
    const Note& note = melody.notes[i];
    const double length = note.beats * seconds_per_beat;
    const double velocity =
        1.0 + (version.velocity_jitter > 0.0
                   ? uniform(rng, -version.velocity_jitter, version.velocity_jitter)
                   : 0.0);
    const double f0 = midi_to_hz(note.midi + version.transpose);
    const auto first = static_cast<std::size_t>(std::llround(start * sample_rate_hz));
    const auto last = std::min(
        n_samples, static_cast<std::size_t>(std::llround((start + length) * sample_rate_hz)));
    for (std::size_t h = 0; h < melody.timbre.harmonics.size(); ++h) {
      const double f = f0 * static_cast<double>(h + 1);
      if (f >= 0.9 * nyquist) break;
      const double amp = velocity * melody.timbre.harmonics[h];
      const double w = 2.0 * std::numbers::pi * f / sample_rate_hz;
      for (std::size_t s = first; s < last; ++s) {
        const double t = static_cast<double>(s - first) / sample_rate_hz;
        const double remaining = static_cast<double>(last - s) / sample_rate_hz;
        double env = std::exp(-melody.timbre.decay_per_second * t);
        if (t < kAttackSeconds) env *= t / kAttackSeconds;
        if (remaining < kReleaseSeconds) env *= remaining / kReleaseSeconds;
        buffer[s] += amp * env * std::sin(w * static_cast<double>(s - first));
      }
    }
    start += length;
  }

  double peak = 0.0;
  for (double v : buffer) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 0.8 * version.gain / peak : 0.0;
  std::normal_distribution<double> noise(0.0, 1.0);
  AudioClip clip;
  clip.sample_rate_hz = sample_rate_hz;
  clip.samples.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double v = buffer[s] * scale;
    if (version.noise_level > 0.0) v += version.noise_level * noise(rng);
    clip.samples[s] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return clip;
}

void SynthConfig::validate() const {
  if (n_cliques < 2 || versions_per_clique < 2) {
    fail(ErrorCode::kInvalidParam, "synthesis needs at least 2 cliques and 2 versions per clique");
  }
  if (!(duration_seconds > 0.0) || sample_rate_hz <= 0) {
    fail(ErrorCode::kInvalidParam, "duration and sample rate must be positive");
  }
}

namespace {

// Versions of clique `c`, drawn from the clique's own seed.
std::vector<SynthTrack> render_clique(const SynthConfig& config, std::size_t c) {
  const std::size_t clique_width =
      std::max<std::size_t>(2, std::to_string(config.n_cliques - 1).size());
  const std::size_t version_width =
      std::max<std::size_t>(2, std::to_string(config.versions_per_clique - 1).size());
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(c)));
  const Melody melody = random_melody(rng);
  const std::string clique_id = "c" + two_digits(c, clique_width);
  std::vector<SynthTrack> out(config.versions_per_clique);
  for (std::size_t v = 0; v < config.versions_per_clique; ++v) {
    const VersionParams version = random_version(rng);
    out[v].clique_id = clique_id;
    out[v].track_id = clique_id + "_v" + two_digits(v, version_width);
    out[v].clip = render_melody(melody, version, config.duration_seconds, config.sample_rate_hz);
    out[v].clip.source_id = out[v].track_id;
  }
  return out;
}

}  // namespace

std::vector<SynthTrack> synthesize_tracks(const SynthConfig& config) {
  config.validate();
  std::vector<std::vector<SynthTrack>> per_clique(config.n_cliques);
  parallel_for(
      config.n_cliques, [&](std::size_t c) { per_clique[c] = render_clique(config, c); },
      config.workers);
  std::vector<SynthTrack> tracks;
  for (auto& group : per_clique) {
    for (auto& t : group) tracks.push_back(std::move(t));
  }
  return tracks;
}

CliqueSet synthesize_corpus(const SynthConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (ec) {
    fail(ErrorCode::kIoFailure, "cannot create " + (out_dir / "audio").string() + ": " + ec.message());
  }
  std::vector<Clique> cliques(config.n_cliques);
  parallel_for(
      config.n_cliques,
      [&](std::size_t c) {
        for (const auto& t : render_clique(config, c)) {
          const std::string rel = "audio/" + t.track_id + ".wav";
          save_wav(out_dir / rel, t.clip);
          cliques[c].id = t.clique_id;
          cliques[c].tracks.push_back({t.track_id, rel});
        }
      },
      config.workers);
  CliqueSet set(std::move(cliques));
  save_manifest(out_dir / "manifest.txt", set);
  return set;
}

}  // namespace coverdet
