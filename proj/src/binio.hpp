#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gatnet/errors.hpp"

// Little-endian binary I/O with byte-offset tracking for error reporting.
// The on-disk formats are fixed little-endian regardless of host.
namespace gatnet::binio {

inline bool host_little_endian() {
  const uint32_t probe = 1;
  uint8_t b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

struct Writer {
  std::ofstream out;
  size_t offset = 0;

  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw DataError("cannot open '" + path + "' for writing");
  }

  void bytes(const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n));
    offset += n;
  }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f32_array(const float* p, size_t n) {
    if (host_little_endian()) {
      bytes(p, n * 4);
    } else {
      for (size_t i = 0; i < n; ++i) f32(p[i]);
    }
  }
  void u32_array(const uint32_t* p, size_t n) {
    if (host_little_endian()) {
      bytes(p, n * 4);
    } else {
      for (size_t i = 0; i < n; ++i) u32(p[i]);
    }
  }
  void magic(const char m[4]) { bytes(m, 4); }

  void close() {
    out.close();
    if (!out) throw DataError("write failure while closing file");
  }
};

struct Reader {
  std::vector<uint8_t> buf;
  size_t offset = 0;
  std::string path;

  explicit Reader(const std::string& p) : path(p) {
    std::ifstream in(p, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open '" + p + "' for reading");
    buf.resize(size_t(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (!in) throw DataError("read failure on '" + p + "'");
  }

  void need(size_t n, const char* what) const {
    if (offset + n > buf.size())
      throw FormatError(std::string("truncated file: expected ") + what, offset);
  }
  void bytes(void* p, size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, buf.data() + offset, n);
    offset += n;
  }
  uint8_t u8(const char* what) {
    uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    const uint8_t* b = buf.data() + offset;
    offset += 4;
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
  }
  float f32(const char* what) {
    uint32_t u = u32(what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  void f32_array(float* p, size_t n, const char* what) {
    if (host_little_endian()) {
      bytes(p, n * 4, what);
    } else {
      for (size_t i = 0; i < n; ++i) p[i] = f32(what);
    }
  }
  void u32_array(uint32_t* p, size_t n, const char* what) {
    if (host_little_endian()) {
      bytes(p, n * 4, what);
    } else {
      for (size_t i = 0; i < n; ++i) p[i] = u32(what);
    }
  }
  void expect_magic(const char m[4], const char* kind) {
    char got[4];
    bytes(got, 4, "magic");
    if (std::memcmp(got, m, 4) != 0)
      throw FormatError(std::string("bad magic, not a ") + kind + " file", offset - 4);
  }
  void expect_end() const {
    if (offset != buf.size())
      throw FormatError("trailing bytes after payload", offset);
  }
};

}  // namespace gatnet::binio
