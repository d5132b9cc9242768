#include "bassl/io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "bassl/errors.hpp"

namespace bassl::io {

namespace {

std::string offset_msg(const std::string& what, std::streamoff off) {
  return what + " (byte offset " + std::to_string(off) + ")";
}

}  // namespace

void write_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

void write_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void write_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

void write_bytes(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* data, size_t n, const std::string& what) {
  const std::streamoff off = is.tellg();
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    throw DataError("truncated: " + offset_msg(what, off));
  }
}

uint8_t read_u8(std::istream& is, const std::string& what) {
  uint8_t v;
  read_bytes(is, &v, 1, what);
  return v;
}

uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  read_bytes(is, b, 4, what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

float read_f32(std::istream& is, const std::string& what) {
  const uint32_t u = read_u32(is, what);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace bassl::io
