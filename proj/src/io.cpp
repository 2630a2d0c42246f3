#include "drex/io.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace drex {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xedb88320u ^ (c >> 1) : (c >> 1);
    }
    t[i] = c;
  }
  return t;
}

}  // namespace

std::uint32_t crc32_bytes(const void* data, std::size_t len, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xffffffffu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

std::uint32_t crc32(std::string_view s, std::uint32_t seed) {
  return crc32_bytes(s.data(), s.size(), seed);
}

std::uint32_t crc32_file(const std::string& path) {
  const std::string buf = read_file(path);
  return crc32(buf);
}

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v & 0xff));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

void ByteWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  u64(bits);
}

void ByteWriter::str(std::string_view s) {
  if (s.size() > 0xffffffffull) throw ContractError("ByteWriter::str: string too long");
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s.data(), s.size());
}

void ByteWriter::raw(const void* data, std::size_t len) {
  buf_.append(static_cast<const char*>(data), len);
}

void ByteReader::need(std::size_t n) {
  if (buf_.size() - pos_ < n) {
    throw FormatError("binary payload truncated: needed " + std::to_string(n) + " byte(s) at offset " +
                      std::to_string(pos_));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint16_t ByteReader::u16() {
  std::uint16_t v = u8();
  v |= static_cast<std::uint16_t>(u8()) << 8;
  return v;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
  return v;
}

std::int64_t ByteReader::i64() { return static_cast<std::int64_t>(u64()); }

double ByteReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(buf_.substr(pos_, n));
  pos_ += n;
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return buf;
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed: " + path);
}

void write_framed_file(const std::string& path, const char magic[4], std::uint16_t version,
                       std::string_view payload) {
  ByteWriter w;
  w.raw(magic, 4);
  w.u16(version);
  w.raw(payload.data(), payload.size());
  const std::uint32_t sum = crc32(w.buffer());
  w.u32(sum);
  write_file(path, w.buffer());
}

std::string read_framed_file(const std::string& path, const char magic[4],
                             std::uint16_t expect_version) {
  const std::string buf = read_file(path);
  if (buf.size() < 10) throw FormatError("file too short to be a valid artifact: " + path);
  if (std::memcmp(buf.data(), magic, 4) != 0) {
    throw FormatError("bad magic header in " + path + ": expected '" + std::string(magic, 4) + "'");
  }
  ByteReader tail(std::string_view(buf).substr(buf.size() - 4));
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = crc32_bytes(buf.data(), buf.size() - 4);
  if (stored != actual) {
    throw ChecksumError("checksum mismatch in " + path + ": file is corrupt or truncated");
  }
  ByteReader head(std::string_view(buf).substr(4, 2));
  const std::uint16_t version = head.u16();
  if (version != expect_version) {
    throw FormatError("unsupported version " + std::to_string(version) + " in " + path +
                      " (expected " + std::to_string(expect_version) + ")");
  }
  return buf.substr(6, buf.size() - 10);
}

}  // namespace drex
