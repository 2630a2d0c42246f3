#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "drex/io.hpp"

using namespace drex;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("drex_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("crc32 known vectors") {
  CHECK(crc32("") == 0u);
  CHECK(crc32("123456789") == 0xcbf43926u);
  // chaining matches one-shot
  const std::uint32_t part = crc32("12345");
  CHECK(crc32("6789", part) == 0xcbf43926u);
}

TEST_CASE("byte writer and reader round-trip") {
  ByteWriter w;
  w.u8(0xab);
  w.u16(0x1234);
  w.u32(0xdeadbeef);
  w.u64(0x0123456789abcdefull);
  w.i64(-42);
  w.f64(3.141592653589793);
  w.f64(-0.0);
  w.str("hello");
  w.str("");

  ByteReader r(w.buffer());
  CHECK(r.u8() == 0xab);
  CHECK(r.u16() == 0x1234);
  CHECK(r.u32() == 0xdeadbeefu);
  CHECK(r.u64() == 0x0123456789abcdefull);
  CHECK(r.i64() == -42);
  CHECK(r.f64() == 3.141592653589793);
  const double neg_zero = r.f64();
  CHECK(neg_zero == 0.0);
  CHECK(std::signbit(neg_zero));
  CHECK(r.str() == "hello");
  CHECK(r.str() == "");
  CHECK(r.done());
}

TEST_CASE("reader rejects overruns") {
  ByteWriter w;
  w.u16(7);
  ByteReader r(w.buffer());
  CHECK(r.u16() == 7);
  CHECK_THROWS_AS(r.u8(), FormatError);

  ByteWriter w2;
  w2.u32(1000);  // claims a 1000-byte string that is not there
  ByteReader r2(w2.buffer());
  CHECK_THROWS_AS(r2.str(), FormatError);
}

TEST_CASE("framed files verify checksum before parsing") {
  TempDir tmp;
  const char magic[4] = {'T', 'S', 'T', '1'};
  ByteWriter payload;
  payload.str("payload body");
  payload.u64(1234567);
  write_framed_file(tmp.file("ok.bin"), magic, 3, payload.buffer());

  SUBCASE("round-trip") {
    const std::string body = read_framed_file(tmp.file("ok.bin"), magic, 3);
    ByteReader r(body);
    CHECK(r.str() == "payload body");
    CHECK(r.u64() == 1234567);
    CHECK(r.done());
  }

  SUBCASE("wrong magic") {
    const char other[4] = {'N', 'O', 'P', 'E'};
    CHECK_THROWS_AS(read_framed_file(tmp.file("ok.bin"), other, 3), FormatError);
  }

  SUBCASE("wrong version") {
    CHECK_THROWS_AS(read_framed_file(tmp.file("ok.bin"), magic, 4), FormatError);
  }

  SUBCASE("truncation -> checksum error") {
    std::string buf = read_file(tmp.file("ok.bin"));
    write_file(tmp.file("cut.bin"), std::string_view(buf).substr(0, buf.size() - 5));
    CHECK_THROWS_AS(read_framed_file(tmp.file("cut.bin"), magic, 3), ChecksumError);
  }

  SUBCASE("bit flip -> checksum error") {
    std::string buf = read_file(tmp.file("ok.bin"));
    buf[buf.size() / 2] ^= 0x40;
    write_file(tmp.file("flip.bin"), buf);
    CHECK_THROWS_AS(read_framed_file(tmp.file("flip.bin"), magic, 3), ChecksumError);
  }

  SUBCASE("missing file -> io error") {
    CHECK_THROWS_AS(read_framed_file(tmp.file("absent.bin"), magic, 3), IoError);
  }
}
