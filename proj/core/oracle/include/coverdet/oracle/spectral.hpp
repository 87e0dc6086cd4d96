#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace coverdet::oracle {

/// |sum_n x[n] e^{-2 pi i k n / N}| evaluated directly for one DFT bin.
double dft_magnitude(std::span<const float> samples, std::size_t bin);

/// Index of the largest |DFT| bin in [1, N/2], by direct evaluation.
std::size_t dft_peak_bin(std::span<const float> samples);

/// Constant-Q magnitude of one (bin, frame) cell, written straight from the
/// definition in long double: Hann window of length ceil(Q sr / f_k) centred
/// on sample frame * hop, normalized by the window sum, zero outside the clip.
double naive_cqt_cell(std::span<const float> samples, int sample_rate_hz, double fmin_hz,
                      int bins_per_octave, int bin, int hop_samples, std::size_t frame);

/// Full n_bins x n_frames magnitude matrix from naive_cqt_cell.
std::vector<double> naive_cqt(std::span<const float> samples, int sample_rate_hz,
                              double fmin_hz, int n_bins, int bins_per_octave, int hop_samples);

struct CqtOracleResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// The suite behind `coverdet selftest`: implementation vs naive oracle on
/// five random 3 s signals (1e-6 relative), tone localization at C1, A4, B7,
/// and octave-shift covariance.
std::vector<CqtOracleResult> run_cqt_oracle_suite(std::uint64_t seed = 99);

}  // namespace coverdet::oracle
