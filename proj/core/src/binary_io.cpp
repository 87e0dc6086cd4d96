#include "coverdet/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "coverdet/error.hpp"

namespace coverdet {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::put_bytes(std::string_view bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::put_u32(std::uint32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  buf_.insert(buf_.end(), raw, raw + 4);
}

void ByteWriter::put_u64(std::uint64_t v) {
  std::uint8_t raw[8];
  std::memcpy(raw, &v, 8);
  buf_.insert(buf_.end(), raw, raw + 8);
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_f32_array(std::span<const float> values) {
  const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
  buf_.insert(buf_.end(), raw, raw + values.size_bytes());
}

void ByteReader::require(std::size_t n) const {
  if (n > remaining()) {
    fail(ErrorCode::kChecksumMismatch, "unexpected end of data (truncated payload)");
  }
}

std::string ByteReader::get_bytes(std::size_t n) {
  require(n);
  std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::get_u32() {
  require(4);
  std::uint32_t v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::get_u64() {
  require(8);
  std::uint64_t v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

float ByteReader::get_f32() { return std::bit_cast<float>(get_u32()); }

double ByteReader::get_f64() { return std::bit_cast<double>(get_u64()); }

void ByteReader::get_f32_array(std::span<float> out) {
  require(out.size_bytes());
  std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    fail(ErrorCode::kIoFailure, "read error on " + path.string());
  }
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      fail(ErrorCode::kIoFailure, "cannot open " + tmp.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      fail(ErrorCode::kIoFailure, "write error on " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorCode::kIoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
  }
}

void seal_with_crc(ByteWriter& writer) {
  writer.put_u32(crc32(writer.bytes()));
}

std::span<const std::uint8_t> verify_crc(std::span<const std::uint8_t> bytes,
                                         const std::string& what) {
  if (bytes.size() < 4) {
    fail(ErrorCode::kChecksumMismatch, what + ": file too short");
  }
  auto payload = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + payload.size(), 4);
  if (crc32(payload) != stored) {
    fail(ErrorCode::kChecksumMismatch, what + ": CRC32 mismatch");
  }
  return payload;
}

}  // namespace coverdet
