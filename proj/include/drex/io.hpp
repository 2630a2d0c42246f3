#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "drex/common.hpp"

namespace drex {

// CRC-32 (IEEE, reflected). seed chains across calls: crc32(b, crc32(a)).
std::uint32_t crc32_bytes(const void* data, std::size_t len, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view s, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::string& path);

// Little-endian binary buffer. Fixed widths keep artifacts portable.
class ByteWriter {
 public:
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(std::string_view s);  // u32 length prefix
  void raw(const void* data, std::size_t len);

  const std::string& buffer() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view buf) : buf_(buf) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();

  std::size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);
  std::string_view buf_;
  std::size_t pos_ = 0;
};

// Framed artifact: magic(4) | version(u16) | payload | crc32(u32, little
// endian, over everything before it). The checksum is verified over the whole
// buffer before any payload byte is parsed.
void write_framed_file(const std::string& path, const char magic[4], std::uint16_t version,
                       std::string_view payload);
std::string read_framed_file(const std::string& path, const char magic[4],
                             std::uint16_t expect_version);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace drex
