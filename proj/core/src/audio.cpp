#include "coverdet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"

namespace coverdet {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

std::uint16_t read_u16(const std::uint8_t* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

std::uint32_t read_u32(const std::uint8_t* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

WavFormat parse_fmt(std::span<const std::uint8_t> chunk) {
  if (chunk.size() < 16) {
    fail(ErrorCode::kMalformedContainer, "fmt chunk shorter than 16 bytes");
  }
  WavFormat fmt;
  fmt.format = read_u16(chunk.data());
  fmt.channels = read_u16(chunk.data() + 2);
  fmt.sample_rate = read_u32(chunk.data() + 4);
  fmt.bits = read_u16(chunk.data() + 14);
  if (fmt.format == kFormatExtensible) {
    // The subformat GUID starts with the real format tag.
    if (chunk.size() < 26) {
      fail(ErrorCode::kMalformedContainer, "truncated WAVE_FORMAT_EXTENSIBLE header");
    }
    fmt.format = read_u16(chunk.data() + 24);
  }
  return fmt;
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id,
                     int target_rate_hz) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorCode::kMalformedContainer, source_id + ": not a RIFF/WAVE file");
  }

  std::optional<WavFormat> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* header = bytes.data() + pos;
    const std::uint32_t size = read_u32(header + 4);
    const std::size_t body = pos + 8;
    // Tolerate a data chunk whose declared size overruns the file (common in
    // streamed recordings); any other overrun is malformed.
    std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(header, "fmt ", 4) == 0) {
      if (avail < size) {
        fail(ErrorCode::kMalformedContainer, source_id + ": truncated fmt chunk");
      }
      fmt = parse_fmt(bytes.subspan(body, avail));
    } else if (std::memcmp(header, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!fmt || !have_data) {
    fail(ErrorCode::kMalformedContainer, source_id + ": missing fmt or data chunk");
  }

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits == 16;
  const bool float32 = fmt->format == kFormatFloat && fmt->bits == 32;
  if (!pcm16 && !float32) {
    fail(ErrorCode::kUnsupportedEncoding,
         source_id + ": format tag " + std::to_string(fmt->format) + " with " +
             std::to_string(fmt->bits) + " bits (need PCM16 or float32)");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    fail(ErrorCode::kUnsupportedEncoding,
         source_id + ": " + std::to_string(fmt->channels) + " channels");
  }
  if (fmt->sample_rate < 8000 || fmt->sample_rate > 48000) {
    fail(ErrorCode::kUnsupportedEncoding,
         source_id + ": sample rate " + std::to_string(fmt->sample_rate) +
             " outside [8000, 48000]");
  }

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) {
    fail(ErrorCode::kEmptyAudio, source_id + ": no samples");
  }

  auto sample_at = [&](std::size_t frame, std::size_t ch) -> float {
    const std::uint8_t* p = data.data() + frame * frame_bytes + ch * bytes_per_sample;
    if (pcm16) {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<float>(v) / 32768.0f;
    }
    float v;
    std::memcpy(&v, p, 4);
    if (!std::isfinite(v)) v = 0.0f;
    return std::clamp(v, -1.0f, 1.0f);
  };

  std::vector<float> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    if (fmt->channels == 1) {
      mono[i] = sample_at(i, 0);
    } else {
      mono[i] = 0.5f * (sample_at(i, 0) + sample_at(i, 1));
    }
  }

  AudioClip clip;
  clip.source_id = std::move(source_id);
  clip.sample_rate_hz = target_rate_hz;
  clip.samples = resample_linear(mono, static_cast<int>(fmt->sample_rate), target_rate_hz);
  return clip;
}

AudioClip load_wav(const std::filesystem::path& path, int target_rate_hz) {
  const auto bytes = read_file(path);
  return decode_wav(bytes, path.stem().string(), target_rate_hz);
}

std::vector<float> resample_linear(std::span<const float> samples, int from_hz,
                                   int to_hz) {
  if (from_hz <= 0 || to_hz <= 0) {
    fail(ErrorCode::kInvalidParam, "sample rates must be positive");
  }
  if (from_hz == to_hz) return {samples.begin(), samples.end()};
  if (samples.empty()) return {};

  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(samples.size()) * to_hz / static_cast<double>(from_hz)));
  std::vector<float> out(std::max<std::size_t>(out_len, 1));
  const double step = static_cast<double>(from_hz) / to_hz;
  const std::size_t last = samples.size() - 1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto left = static_cast<std::size_t>(pos);
    if (left >= last) {
      out[i] = samples[last];
      continue;
    }
    const double frac = pos - static_cast<double>(left);
    out[i] = static_cast<float>((1.0 - frac) * samples[left] + frac * samples[left + 1]);
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  ByteWriter w;
  w.put_bytes("RIFF");
  w.put_u32(36 + data_bytes);
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put_u32(16);
  w.put_u32(kFormatPcm | (1u << 16));  // format tag, channels = 1
  w.put_u32(static_cast<std::uint32_t>(clip.sample_rate_hz));
  w.put_u32(static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);  // byte rate
  w.put_u32(2u | (16u << 16));  // block align, bits per sample
  w.put_bytes("data");
  w.put_u32(data_bytes);
  auto& buf = w.bytes();
  buf.reserve(buf.size() + data_bytes);
  for (float s : clip.samples) {
    const double scaled = std::clamp(static_cast<double>(s), -1.0, 1.0) * 32767.0;
    const auto v = static_cast<std::int16_t>(std::lround(scaled));
    std::uint8_t raw[2];
    std::memcpy(raw, &v, 2);
    buf.push_back(raw[0]);
    buf.push_back(raw[1]);
  }
  return buf;
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_file_atomic(path, encode_wav_pcm16(clip));
}

}  // namespace coverdet
