#include "coverdet/oracle/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "coverdet/cqt.hpp"
#include "coverdet/random.hpp"

namespace coverdet::oracle {
namespace {

constexpr long double kPi = 3.141592653589793238462643383279502884L;
constexpr int kSampleRate = 22050;

std::vector<float> tone(double freq_hz, double seconds, std::initializer_list<double> harmonics) {
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    int h = 1;
    for (double amp : harmonics) {
      v += amp * std::sin(2.0 * std::numbers::pi * freq_hz * h * static_cast<double>(i) / kSampleRate);
      ++h;
    }
    out[i] = static_cast<float>(0.5 * v);
  }
  return out;
}

// Bin magnitudes averaged over frames whose window lies fully inside the clip.
std::vector<double> interior_profile(std::span<const float> samples, int n_bins) {
  const int hop = 2048;
  const auto mags = naive_cqt(samples, kSampleRate, kC1Hz, n_bins, kBinsPerOctave, hop);
  const std::size_t frames = frame_count(samples.size(), hop);
  const std::size_t guard = window_length(kC1Hz, kBinsPerOctave, kSampleRate) / 2;
  std::vector<double> profile(static_cast<std::size_t>(n_bins), 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t centre = t * hop;
    if (centre < guard || centre + guard > samples.size()) continue;
    for (std::size_t k = 0; k < profile.size(); ++k) profile[k] += mags[k * frames + t];
  }
  return profile;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<std::size_t> top_bins(const std::vector<double>& v, std::size_t count) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double dft_magnitude(std::span<const float> samples, std::size_t bin) {
  const long double n = static_cast<long double>(samples.size());
  long double re = 0.0L;
  long double im = 0.0L;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const long double phase = -2.0L * kPi * static_cast<long double>(bin) * i / n;
    re += samples[i] * std::cos(phase);
    im += samples[i] * std::sin(phase);
  }
  return static_cast<double>(std::hypot(re, im));
}

std::size_t dft_peak_bin(std::span<const float> samples) {
  std::size_t best = 1;
  double best_mag = -1.0;
  for (std::size_t k = 1; k <= samples.size() / 2; ++k) {
    const double m = dft_magnitude(samples, k);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  return best;
}

double naive_cqt_cell(std::span<const float> samples, int sample_rate_hz, double fmin_hz,
                      int bins_per_octave, int bin, int hop_samples, std::size_t frame) {
  const long double q = 1.0L / (std::pow(2.0L, 1.0L / bins_per_octave) - 1.0L);
  const long double f = fmin_hz * std::pow(2.0L, static_cast<long double>(bin) / bins_per_octave);
  const auto n = static_cast<long long>(std::ceil(q * sample_rate_hz / f));
  const long long centre = static_cast<long long>(frame) * hop_samples;
  const long long first = centre - n / 2;

  long double window_sum = 0.0L;
  for (long long i = 0; i < n; ++i) window_sum += 0.5L * (1.0L - std::cos(2.0L * kPi * i / n));

  long double re = 0.0L;
  long double im = 0.0L;
  for (long long i = 0; i < n; ++i) {
    const long long s = first + i;
    if (s < 0 || s >= static_cast<long long>(samples.size())) continue;
    const long double w = 0.5L * (1.0L - std::cos(2.0L * kPi * i / n));
    const long double phase = -2.0L * kPi * f * static_cast<long double>(s - centre) / sample_rate_hz;
    re += w * samples[static_cast<std::size_t>(s)] * std::cos(phase);
    im += w * samples[static_cast<std::size_t>(s)] * std::sin(phase);
  }
  return static_cast<double>(std::hypot(re, im) / window_sum);
}

std::vector<double> naive_cqt(std::span<const float> samples, int sample_rate_hz, double fmin_hz,
                              int n_bins, int bins_per_octave, int hop_samples) {
  const std::size_t frames =
      (samples.size() + static_cast<std::size_t>(hop_samples) - 1) / static_cast<std::size_t>(hop_samples);
  std::vector<double> out(static_cast<std::size_t>(n_bins) * frames);
  for (int k = 0; k < n_bins; ++k) {
    for (std::size_t t = 0; t < frames; ++t) {
      out[static_cast<std::size_t>(k) * frames + t] =
          naive_cqt_cell(samples, sample_rate_hz, fmin_hz, bins_per_octave, k, hop_samples, t);
    }
  }
  return out;
}

std::vector<CqtOracleResult> run_cqt_oracle_suite(std::uint64_t seed) {
  std::vector<CqtOracleResult> results;

  {
    CqtOracleResult r{"naive-agreement", true, {}};
    CqtParams params;
    const CqtKernel kernel(params, kSampleRate);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng rng(derive_seed(seed, s));
      std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
      std::vector<float> x(3 * kSampleRate);
      for (float& v : x) v = dist(rng);
      const auto fast = kernel.magnitudes(x);
      const auto slow = naive_cqt(x, kSampleRate, params.fmin_hz, params.n_bins,
                                  params.bins_per_octave, params.hop_samples);
      double peak = 0.0;
      for (double v : slow) peak = std::max(peak, v);
      for (std::size_t i = 0; i < slow.size(); ++i) {
        const double rel = std::abs(fast[i] - slow[i]) / std::max(std::abs(slow[i]), 1e-9 * peak);
        worst = std::max(worst, rel);
      }
    }
    r.passed = worst < 1e-6;
    std::ostringstream os;
    os << "max relative error " << worst;
    r.detail = os.str();
    results.push_back(r);
  }

  // 440 Hz sits 45 semitones above C1; bin 49 is C#5.
  struct Tone {
    const char* name;
    double hz;
    int bin;
  };
  for (const auto& [name, f, bin] : {Tone{"tone-C1", kC1Hz, 0}, Tone{"tone-A4", 440.0, 45},
                                     Tone{"tone-C#5", 554.365261953744, 49},
                                     Tone{"tone-B7", 3951.066410048992, 83}}) {
    const CqtParams params;
    const CqtKernel kernel(params, kSampleRate);
    const auto x = tone(f, 2.0, {1.0});
    const auto mags = kernel.magnitudes(x);
    const std::size_t frames = frame_count(x.size(), params.hop_samples);
    std::vector<double> profile(kCqtBins, 0.0);
    // Frame 4 is centred at 0.93 s, clear of both edges even for the C1 window.
    const std::size_t t = std::min<std::size_t>(4, frames - 1);
    for (std::size_t k = 0; k < profile.size(); ++k) profile[k] = mags[k * frames + t];
    const std::size_t peak = argmax(profile);
    std::ostringstream os;
    os << "expected bin " << bin << ", got " << peak;
    results.push_back({name, peak == static_cast<std::size_t>(bin), os.str()});
  }

  {
    const double f = kC1Hz * std::exp2(20.0 / 12.0);
    const auto low = interior_profile(tone(f, 1.5, {1.0, 0.6, 0.35}), kCqtBins);
    const auto high = interior_profile(tone(2.0 * f, 1.5, {1.0, 0.6, 0.35}), kCqtBins);
    const auto low_top = top_bins(low, 3);
    const auto high_top = top_bins(high, 3);
    bool shifted = true;
    for (std::size_t i = 0; i < 3; ++i) shifted = shifted && high_top[i] == low_top[i] + 12;
    std::ostringstream os;
    os << "low peaks " << low_top[0] << "," << low_top[1] << "," << low_top[2] << " high peaks "
       << high_top[0] << "," << high_top[1] << "," << high_top[2];
    results.push_back({"octave-shift", shifted, os.str()});
  }
  return results;
}

}  // namespace coverdet::oracle
