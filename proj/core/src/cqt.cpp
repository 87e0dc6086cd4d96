#include "coverdet/cqt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"
#include "coverdet/random.hpp"

namespace coverdet {
namespace {

constexpr char kCqtMagic[4] = {'C', 'Q', 'T', '1'};

}  // namespace

void CqtParams::validate() const {
  if (!(fmin_hz > 0.0) || n_bins < 1 || bins_per_octave < 1) {
    fail(ErrorCode::kInvalidParam, "CQT needs fmin > 0, n_bins >= 1, bins_per_octave >= 1");
  }
  if (hop_samples <= 0) {
    fail(ErrorCode::kInvalidParam, "hop must be positive, got " + std::to_string(hop_samples));
  }
}

std::vector<double> bin_frequencies(double fmin_hz, int n_bins, int bins_per_octave) {
  if (!(fmin_hz > 0.0) || n_bins < 1 || bins_per_octave < 1) {
    fail(ErrorCode::kInvalidParam, "bin_frequencies needs positive fmin, n_bins, bins_per_octave");
  }
  std::vector<double> freqs(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) {
    freqs[static_cast<std::size_t>(k)] =
        fmin_hz * std::exp2(static_cast<double>(k) / bins_per_octave);
  }
  return freqs;
}

double q_factor(int bins_per_octave) {
  return 1.0 / (std::exp2(1.0 / bins_per_octave) - 1.0);
}

std::size_t window_length(double freq_hz, int bins_per_octave, int sample_rate_hz) {
  return static_cast<std::size_t>(
      std::ceil(q_factor(bins_per_octave) * sample_rate_hz / freq_hz));
}

std::size_t frame_count(std::size_t n_samples, int hop_samples) {
  const auto hop = static_cast<std::size_t>(hop_samples);
  return (n_samples + hop - 1) / hop;
}

CqtKernel::CqtKernel(const CqtParams& params, int sample_rate_hz)
    : params_(params), sample_rate_(sample_rate_hz) {
  params_.validate();
  const auto freqs = bin_frequencies(params.fmin_hz, params.n_bins, params.bins_per_octave);
  if (freqs.back() >= 0.5 * sample_rate_hz) {
    fail(ErrorCode::kInvalidParam, "highest CQT bin above Nyquist");
  }
  bins_.reserve(freqs.size());
  for (double f : freqs) {
    const std::size_t n = window_length(f, params.bins_per_octave, sample_rate_hz);
    Bin bin;
    bin.re.resize(n);
    bin.im.resize(n);
    double window_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      window_sum += 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
    }
    const double half = static_cast<double>(n / 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n)) / window_sum;
      const double phase = -2.0 * std::numbers::pi * f * (static_cast<double>(i) - half) /
                           sample_rate_hz;
      bin.re[i] = w * std::cos(phase);
      bin.im[i] = w * std::sin(phase);
    }
    bins_.push_back(std::move(bin));
  }
}

std::vector<double> CqtKernel::magnitudes(std::span<const float> samples) const {
  const std::size_t n_frames = frame_count(samples.size(), params_.hop_samples);
  const std::size_t n_bins = bins_.size();
  std::vector<double> out(n_bins * n_frames);
  const auto len = static_cast<std::ptrdiff_t>(samples.size());

  for (std::size_t k = 0; k < n_bins; ++k) {
    const Bin& bin = bins_[k];
    const auto n = static_cast<std::ptrdiff_t>(bin.re.size());
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(t) * params_.hop_samples - n / 2;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, len - start);
      double re = 0.0;
      double im = 0.0;
      for (std::ptrdiff_t i = lo; i < hi; ++i) {
        const double x = samples[static_cast<std::size_t>(start + i)];
        re += x * bin.re[static_cast<std::size_t>(i)];
        im += x * bin.im[static_cast<std::size_t>(i)];
      }
      out[k * n_frames + t] = std::hypot(re, im);
    }
  }
  return out;
}

std::vector<float> magnitudes_to_db(std::span<const double> magnitudes, bool normalize) {
  std::vector<float> out(magnitudes.size(), kLogFloorDb);
  double peak = 0.0;
  for (double m : magnitudes) peak = std::max(peak, m);
  if (normalize && peak <= 0.0) return out;
  const double ref_db = normalize ? 20.0 * std::log10(peak) : 0.0;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] <= 0.0) continue;
    const double db = 20.0 * std::log10(magnitudes[i]) - ref_db;
    out[i] = static_cast<float>(std::max(db, static_cast<double>(kLogFloorDb)));
  }
  return out;
}

CqtSpectrogram compute_cqt(const AudioClip& clip, int hop_samples) {
  CqtParams params;
  params.hop_samples = hop_samples;
  params.validate();
  return compute_cqt(clip, CqtKernel(params, clip.sample_rate_hz));
}

CqtSpectrogram compute_cqt(const AudioClip& clip, const CqtKernel& kernel) {
  if (clip.sample_rate_hz != kernel.sample_rate_hz()) {
    fail(ErrorCode::kInvalidParam, clip.source_id + ": clip rate " +
                                       std::to_string(clip.sample_rate_hz) +
                                       " does not match kernel rate " +
                                       std::to_string(kernel.sample_rate_hz()));
  }
  if (clip.samples.size() < kernel.longest_window()) {
    fail(ErrorCode::kClipTooShort, clip.source_id + ": " + std::to_string(clip.samples.size()) +
                                       " samples, need at least " +
                                       std::to_string(kernel.longest_window()));
  }
  const auto& params = kernel.params();
  CqtSpectrogram spec;
  spec.n_bins = static_cast<std::size_t>(params.n_bins);
  spec.n_frames = frame_count(clip.samples.size(), params.hop_samples);
  spec.hop_seconds = static_cast<double>(params.hop_samples) / clip.sample_rate_hz;
  spec.fmin_hz = params.fmin_hz;
  spec.bins_per_octave = params.bins_per_octave;
  spec.source_id = clip.source_id;
  spec.data = magnitudes_to_db(kernel.magnitudes(clip.samples), /*normalize=*/true);
  return spec;
}

std::vector<std::uint8_t> encode_cqt(const CqtSpectrogram& spec) {
  if (spec.data.size() != spec.n_bins * spec.n_frames) {
    fail(ErrorCode::kShapeMismatch, "CQT data size does not match n_bins x n_frames");
  }
  ByteWriter w;
  w.put_bytes(std::string_view(kCqtMagic, 4));
  w.put_u32(static_cast<std::uint32_t>(spec.n_bins));
  w.put_u32(static_cast<std::uint32_t>(spec.n_frames));
  w.put_f64(spec.hop_seconds);
  w.put_f64(spec.fmin_hz);
  w.put_f32_array(spec.data);
  seal_with_crc(w);
  return std::move(w.bytes());
}

CqtSpectrogram decode_cqt(std::span<const std::uint8_t> bytes, std::string source_id) {
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), kCqtMagic, head) != 0) {
    fail(ErrorCode::kFormatVersionMismatch, source_id + ": bad magic (expected CQT1)");
  }
  ByteReader r(verify_crc(bytes, source_id));
  r.get_bytes(4);
  CqtSpectrogram spec;
  spec.n_bins = r.get_u32();
  spec.n_frames = r.get_u32();
  spec.hop_seconds = r.get_f64();
  spec.fmin_hz = r.get_f64();
  if (r.remaining() != spec.n_bins * spec.n_frames * sizeof(float)) {
    fail(ErrorCode::kChecksumMismatch, source_id + ": payload size disagrees with header");
  }
  spec.data.resize(spec.n_bins * spec.n_frames);
  r.get_f32_array(spec.data);
  spec.source_id = std::move(source_id);
  return spec;
}

void save_cqt(const CqtSpectrogram& spec, const std::filesystem::path& path) {
  write_file_atomic(path, encode_cqt(spec));
}

CqtSpectrogram load_cqt(const std::filesystem::path& path) {
  return decode_cqt(read_file(path), path.stem().string());
}

CqtSpectrogram crop_or_pad(const CqtSpectrogram& spec, std::size_t target_frames,
                           std::uint64_t seed) {
  if (target_frames < 1) {
    fail(ErrorCode::kInvalidParam, "target_frames must be >= 1");
  }
  CqtSpectrogram out = spec;
  out.n_frames = target_frames;
  out.data.assign(spec.n_bins * target_frames, kLogFloorDb);

  std::size_t start = 0;
  if (spec.n_frames > target_frames) {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, spec.n_frames - target_frames);
    start = pick(rng);
  }
  const std::size_t copy = std::min(spec.n_frames - start, target_frames);
  for (std::size_t k = 0; k < spec.n_bins; ++k) {
    std::copy_n(spec.data.begin() + static_cast<std::ptrdiff_t>(k * spec.n_frames + start),
                copy, out.data.begin() + static_cast<std::ptrdiff_t>(k * target_frames));
  }
  return out;
}

}  // namespace coverdet
