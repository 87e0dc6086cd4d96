#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coverdet/audio.hpp"

namespace coverdet {

/// Equal-temperament C1 with A4 = 440 Hz.
inline constexpr double kC1Hz = 32.703195662574829;
inline constexpr int kBinsPerOctave = 12;
inline constexpr int kCqtBins = 84;
inline constexpr int kDefaultHopSamples = 5120;
inline constexpr int kDefaultInputFrames = 130;
inline constexpr float kLogFloorDb = -80.0f;

struct CqtParams {
  double fmin_hz = kC1Hz;
  int n_bins = kCqtBins;
  int bins_per_octave = kBinsPerOctave;
  int hop_samples = kDefaultHopSamples;

  void validate() const;
};

/// Log-magnitude constant-Q spectrogram. `data` is row-major n_bins x n_frames
/// (row k holds bin k over time).
struct CqtSpectrogram {
  std::size_t n_bins = 0;
  std::size_t n_frames = 0;
  std::vector<float> data;
  double hop_seconds = 0.0;
  double fmin_hz = kC1Hz;
  int bins_per_octave = kBinsPerOctave;
  std::string source_id;

  float at(std::size_t bin, std::size_t frame) const { return data[bin * n_frames + frame]; }
  float& at(std::size_t bin, std::size_t frame) { return data[bin * n_frames + frame]; }
};

/// f_k = fmin * 2^(k / bins_per_octave), k in [0, n_bins).
std::vector<double> bin_frequencies(double fmin_hz, int n_bins, int bins_per_octave);

/// Q = 1 / (2^(1/bins_per_octave) - 1).
double q_factor(int bins_per_octave);

/// Analysis window length for a bin centred at `freq_hz`: ceil(Q * sr / f).
std::size_t window_length(double freq_hz, int bins_per_octave, int sample_rate_hz);

/// Number of frames for a clip: ceil(n_samples / hop). Frame t is centred on
/// sample t * hop; samples outside the clip read as zero.
std::size_t frame_count(std::size_t n_samples, int hop_samples);

/// Precomputed Hann-windowed complex exponentials, one per bin, normalized so
/// a full-scale sinusoid centred on a bin yields magnitude 0.5.
class CqtKernel {
 public:
  CqtKernel(const CqtParams& params, int sample_rate_hz);

  /// Linear magnitudes |X_k(t)|, row-major n_bins x n_frames.
  std::vector<double> magnitudes(std::span<const float> samples) const;

  const CqtParams& params() const { return params_; }
  int sample_rate_hz() const { return sample_rate_; }
  std::size_t longest_window() const { return bins_.front().re.size(); }

 private:
  struct Bin {
    std::vector<double> re;
    std::vector<double> im;
  };

  CqtParams params_;
  int sample_rate_;
  std::vector<Bin> bins_;
};

/// Converts linear magnitudes to dB. With `normalize`, the maximum maps to
/// 0 dB; either way entries are floored at kLogFloorDb. An all-zero input maps
/// to the floor everywhere.
std::vector<float> magnitudes_to_db(std::span<const double> magnitudes, bool normalize);

CqtSpectrogram compute_cqt(const AudioClip& clip, int hop_samples = kDefaultHopSamples);
CqtSpectrogram compute_cqt(const AudioClip& clip, const CqtKernel& kernel);

void save_cqt(const CqtSpectrogram& spec, const std::filesystem::path& path);
CqtSpectrogram load_cqt(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_cqt(const CqtSpectrogram& spec);
CqtSpectrogram decode_cqt(std::span<const std::uint8_t> bytes, std::string source_id);

/// Fixes the frame count: random contiguous crop (start drawn from `seed`) when
/// longer, right padding with kLogFloorDb when shorter.
CqtSpectrogram crop_or_pad(const CqtSpectrogram& spec, std::size_t target_frames,
                           std::uint64_t seed);

}  // namespace coverdet
