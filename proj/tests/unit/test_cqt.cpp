#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "coverdet/cqt.hpp"
#include "coverdet/error.hpp"
#include "coverdet/oracle/spectral.hpp"
#include "test_support.hpp"

using namespace coverdet;
using namespace coverdet::testing;

namespace {

AudioClip clip_of(std::vector<float> samples, std::string id = "clip") {
  AudioClip clip;
  clip.samples = std::move(samples);
  clip.source_id = std::move(id);
  return clip;
}

// Mean linear energy per bin, recovered from the dB matrix.
std::vector<double> mean_energy(const CqtSpectrogram& spec) {
  std::vector<double> e(spec.n_bins, 0.0);
  for (std::size_t k = 0; k < spec.n_bins; ++k) {
    for (std::size_t t = 0; t < spec.n_frames; ++t) e[k] += std::pow(10.0, spec.at(k, t) / 10.0);
  }
  return e;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

const CqtKernel& default_kernel() {
  static const CqtKernel kernel(CqtParams{}, kCanonicalSampleRate);
  return kernel;
}

}  // namespace

TEST(Cqt, BinFrequencies) {
  const auto f = bin_frequencies(kC1Hz, 84, 12);
  ASSERT_EQ(f.size(), 84u);
  EXPECT_NEAR(f[0], 32.70, 0.01);
  EXPECT_DOUBLE_EQ(f[12], 2.0 * f[0]);
  EXPECT_NEAR(f[83], 3951.07, 0.01);
  EXPECT_NEAR(f[45], 440.0, 1e-9);
  EXPECT_NEAR(f[49], 554.365261953744, 1e-9);
  EXPECT_THROW(bin_frequencies(0.0, 84, 12), Error);
  EXPECT_THROW(bin_frequencies(32.7, 0, 12), Error);
  EXPECT_THROW(bin_frequencies(32.7, 84, 0), Error);
}

TEST(Cqt, WindowLengthFollowsQ) {
  EXPECT_NEAR(q_factor(12), 16.8171, 1e-4);
  EXPECT_EQ(window_length(440.0, 12, 22050),
            static_cast<std::size_t>(std::ceil(q_factor(12) * 22050.0 / 440.0)));
  EXPECT_EQ(default_kernel().longest_window(), window_length(kC1Hz, 12, 22050));
}

TEST(Cqt, A4LocalizesToBin45) {
  const auto spec = compute_cqt(clip_of(sine(440.0, 3.0, 22050)), default_kernel());
  EXPECT_EQ(spec.n_bins, 84u);
  EXPECT_EQ(argmax(mean_energy(spec)), 45u);

  const auto x = sine(440.0, 3.0, 22050);
  const auto naive = oracle::naive_cqt(x, 22050, kC1Hz, 84, 12, 5120);
  std::vector<double> e(84, 0.0);
  for (std::size_t k = 0; k < 84; ++k) {
    for (std::size_t t = 0; t < spec.n_frames; ++t) e[k] += naive[k * spec.n_frames + t] * naive[k * spec.n_frames + t];
  }
  EXPECT_EQ(argmax(e), 45u);

  const auto cs5 = compute_cqt(clip_of(sine(554.365261953744, 3.0, 22050)), default_kernel());
  EXPECT_EQ(argmax(mean_energy(cs5)), 49u);
}

TEST(Cqt, SilenceIsFloorEverywhere) {
  const auto spec = compute_cqt(clip_of(std::vector<float>(3 * 22050, 0.0f)), default_kernel());
  for (float v : spec.data) ASSERT_EQ(v, kLogFloorDb);
}

TEST(Cqt, HopAndFrameCount) {
  const auto spec = compute_cqt(clip_of(sine(220.0, 3.0, 22050, 0.3)), default_kernel());
  EXPECT_NEAR(spec.hop_seconds, 5120.0 / 22050.0, 1e-15);
  EXPECT_NEAR(spec.hop_seconds, 0.2322, 1e-4);
  EXPECT_EQ(spec.n_frames, static_cast<std::size_t>(std::ceil(3.0 * 22050 / 5120.0)));
  EXPECT_EQ(spec.data.size(), spec.n_bins * spec.n_frames);
  float peak = -1000.0f;
  for (float v : spec.data) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_GE(v, kLogFloorDb);
    peak = std::max(peak, v);
  }
  EXPECT_FLOAT_EQ(peak, 0.0f);
}

TEST(Cqt, Errors) {
  try {
    compute_cqt(clip_of(std::vector<float>(1000, 0.1f)), default_kernel());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClipTooShort);
  }
  try {
    compute_cqt(clip_of(sine(100, 1.0, 22050)), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidParam);
  }
}

TEST(Cqt, MatchesNaiveOracleOnNoise) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> x(2 * 22050);
  for (float& v : x) v = u(rng);
  const auto fast = default_kernel().magnitudes(x);
  const auto slow = oracle::naive_cqt(x, 22050, kC1Hz, 84, 12, 5120);
  ASSERT_EQ(fast.size(), slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) {
    ASSERT_NEAR(fast[i], slow[i], 1e-6 * std::max(slow[i], 1e-12)) << i;
  }
}

TEST(Cqt, OctaveShiftCovariance) {
  for (int bin : {10, 30, 55}) {
    const double f = kC1Hz * std::exp2(bin / 12.0);
    const auto low = compute_cqt(clip_of(sine(f, 3.0, 22050)), default_kernel());
    const auto high = compute_cqt(clip_of(sine(2.0 * f, 3.0, 22050)), default_kernel());
    EXPECT_EQ(argmax(mean_energy(high)), argmax(mean_energy(low)) + 12) << bin;
  }
}

TEST(Cqt, HalvingAmplitudeShiftsBy6dB) {
  std::mt19937 rng(8);
  std::normal_distribution<float> n(0.0f, 0.2f);
  std::vector<float> x(3 * 22050);
  for (float& v : x) v = n(rng);
  std::vector<float> half(x);
  for (float& v : half) v *= 0.5f;
  const auto a = magnitudes_to_db(default_kernel().magnitudes(x), false);
  const auto b = magnitudes_to_db(default_kernel().magnitudes(half), false);
  const double expected = -20.0 * std::log10(2.0);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] <= kLogFloorDb) continue;
    ASSERT_NEAR(b[i] - a[i], expected, 1e-3);
    ++checked;
  }
  EXPECT_GT(checked, a.size() / 2);
}

TEST(Cqt, PeriodicSignalGivesIdenticalInteriorFrames) {
  // 100 periods per hop, so every frame sees the same waveform phase.
  const int hop = 5120;
  const double f = 22050.0 * 100 / hop;
  std::vector<float> x(6 * 22050);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i % hop) / 22050.0));
  }
  const auto mags = default_kernel().magnitudes(x);
  const std::size_t frames = frame_count(x.size(), hop);
  const std::size_t guard = default_kernel().longest_window() / 2;
  std::size_t reference = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (t * hop < guard || t * hop + guard > x.size()) continue;
    if (reference == 0) {
      reference = t;
      continue;
    }
    for (std::size_t k = 0; k < 84; ++k) {
      ASSERT_NEAR(mags[k * frames + t], mags[k * frames + reference], 1e-6 * mags[k * frames + reference] + 1e-12);
    }
  }
  EXPECT_GT(reference, 0u);
}

TEST(CqtFile, RoundTripIsBitwise) {
  TempDir dir("cqt");
  CqtSpectrogram spec;
  spec.n_bins = 84;
  spec.n_frames = 130;
  spec.hop_seconds = 5120.0 / 22050.0;
  spec.source_id = "track";
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-80.0f, 0.0f);
  spec.data.resize(84 * 130);
  for (float& v : spec.data) v = u(rng);
  save_cqt(spec, dir / "track.cqt");
  const auto back = load_cqt(dir / "track.cqt");
  EXPECT_EQ(back.n_bins, 84u);
  EXPECT_EQ(back.n_frames, 130u);
  EXPECT_EQ(back.hop_seconds, spec.hop_seconds);
  EXPECT_EQ(back.fmin_hz, spec.fmin_hz);
  EXPECT_EQ(back.source_id, "track");
  EXPECT_EQ(std::memcmp(back.data.data(), spec.data.data(), spec.data.size() * sizeof(float)), 0);
}

TEST(CqtFile, WrongMagicAndTruncation) {
  CqtSpectrogram spec;
  spec.n_bins = 2;
  spec.n_frames = 3;
  spec.data = {0, -1, -2, -3, -4, -5};
  auto bytes = encode_cqt(spec);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_cqt(bad_magic, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormatVersionMismatch);
  }
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 9, std::size_t{6}}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      decode_cqt(truncated, "x");
      FAIL() << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kChecksumMismatch) << cut;
    }
  }
  try {
    load_cqt("/nonexistent/dir/x.cqt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoFailure);
  }
}

TEST(CropOrPad, IdentityPadAndCrop) {
  CqtSpectrogram spec;
  spec.n_bins = 3;
  spec.n_frames = 130;
  spec.data.resize(3 * 130);
  for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] = -static_cast<float>(i % 80);
  EXPECT_EQ(crop_or_pad(spec, 130, 1).data, spec.data);

  CqtSpectrogram short_spec = spec;
  short_spec.n_frames = 50;
  short_spec.data.assign(3 * 50, -1.0f);
  const auto padded = crop_or_pad(short_spec, 130, 1);
  ASSERT_EQ(padded.n_frames, 130u);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(padded.at(k, t), -1.0f);
    for (std::size_t t = 50; t < 130; ++t) EXPECT_EQ(padded.at(k, t), kLogFloorDb);
  }

  CqtSpectrogram long_spec;
  long_spec.n_bins = 2;
  long_spec.n_frames = 258;
  long_spec.data.resize(2 * 258);
  for (std::size_t i = 0; i < long_spec.data.size(); ++i) long_spec.data[i] = static_cast<float>(i % 258);
  const auto a = crop_or_pad(long_spec, 130, 99);
  const auto b = crop_or_pad(long_spec, 130, 99);
  EXPECT_EQ(a.data, b.data);
  const auto start = static_cast<std::size_t>(a.at(0, 0));
  EXPECT_LE(start, 128u);
  for (std::size_t t = 0; t < 130; ++t) {
    EXPECT_EQ(a.at(0, t), static_cast<float>(start + t));
    EXPECT_EQ(a.at(1, t), static_cast<float>(start + t));
  }
}
