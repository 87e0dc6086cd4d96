#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "coverdet/audio.hpp"
#include "coverdet/binary_io.hpp"

namespace coverdet::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coverdet-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> sine(double freq_hz, double seconds, int rate, double amplitude = 1.0) {
  std::vector<float> out(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * i / rate));
  }
  return out;
}

/// Hand-built RIFF/WAVE bytes: PCM16 (format 1) or float32 (format 3).
inline std::vector<std::uint8_t> make_wav(std::uint16_t format, std::uint16_t channels,
                                          std::uint32_t rate, std::uint16_t bits,
                                          const std::vector<std::uint8_t>& data) {
  ByteWriter w;
  const std::uint32_t block = channels * bits / 8u;
  w.put_bytes("RIFF");
  w.put_u32(static_cast<std::uint32_t>(36 + data.size()));
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put_u32(16);
  w.bytes().push_back(static_cast<std::uint8_t>(format & 0xff));
  w.bytes().push_back(static_cast<std::uint8_t>(format >> 8));
  w.bytes().push_back(static_cast<std::uint8_t>(channels & 0xff));
  w.bytes().push_back(static_cast<std::uint8_t>(channels >> 8));
  w.put_u32(rate);
  w.put_u32(rate * block);
  w.bytes().push_back(static_cast<std::uint8_t>(block & 0xff));
  w.bytes().push_back(static_cast<std::uint8_t>(block >> 8));
  w.bytes().push_back(static_cast<std::uint8_t>(bits & 0xff));
  w.bytes().push_back(static_cast<std::uint8_t>(bits >> 8));
  w.put_bytes("data");
  w.put_u32(static_cast<std::uint32_t>(data.size()));
  auto out = w.bytes();
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

inline std::vector<std::uint8_t> pcm16_bytes(const std::vector<std::int16_t>& samples) {
  std::vector<std::uint8_t> out;
  for (std::int16_t s : samples) {
    const auto u = static_cast<std::uint16_t>(s);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

inline std::vector<std::uint8_t> float_bytes(const std::vector<float>& samples) {
  ByteWriter w;
  for (float s : samples) w.put_f32(s);
  return w.bytes();
}

}  // namespace coverdet::testing
