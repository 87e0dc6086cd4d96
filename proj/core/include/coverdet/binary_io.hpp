#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coverdet {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Little-endian byte buffer writer used by every on-disk format.
class ByteWriter {
 public:
  void put_bytes(std::string_view bytes);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_f64(double v);
  void put_f32_array(std::span<const float> values);

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; running past the end throws ChecksumMismatch since
// a short read can only mean a truncated payload.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string get_bytes(std::size_t n);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32();
  double get_f64();
  void get_f32_array(std::span<float> out);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" and renames over `path`, so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

// Appends CRC32 of everything written so far.
void seal_with_crc(ByteWriter& writer);

// Checks the trailing CRC32 and returns the payload span without it.
std::span<const std::uint8_t> verify_crc(std::span<const std::uint8_t> bytes,
                                         const std::string& what);

}  // namespace coverdet
