#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coverdet {

inline constexpr int kCanonicalSampleRate = 22050;

/// Mono PCM audio at a single sample rate, amplitudes in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalSampleRate;
  std::string source_id;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Parses a RIFF/WAVE image (PCM16 or IEEE float32, mono or stereo, 8-48 kHz),
/// downmixes to mono and resamples to `target_rate_hz`.
///
/// Integer samples are scaled by 1/2^(bits-1); float samples are clamped to
/// [-1, 1]. No gain normalization is applied: the CQT stage normalizes each
/// spectrogram to 0 dB, which makes input level irrelevant downstream.
AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id,
                     int target_rate_hz = kCanonicalSampleRate);

AudioClip load_wav(const std::filesystem::path& path,
                   int target_rate_hz = kCanonicalSampleRate);

/// Linear-interpolation resampler. Output length is round(n * to / from),
/// which keeps the duration error below half an output sample.
std::vector<float> resample_linear(std::span<const float> samples, int from_hz,
                                   int to_hz);

/// 16-bit PCM mono WAV image of `clip` (samples are clamped, then rounded).
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);

void save_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace coverdet
