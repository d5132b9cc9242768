#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace bassl::io {

// Little-endian primitives shared by the corpus and checkpoint formats.
// Reads throw DataError naming `what` and the byte offset of the failure.

void write_u8(std::ostream& os, uint8_t v);
void write_u32(std::ostream& os, uint32_t v);
void write_f32(std::ostream& os, float v);
void write_bytes(std::ostream& os, const void* data, size_t n);

uint8_t read_u8(std::istream& is, const std::string& what);
uint32_t read_u32(std::istream& is, const std::string& what);
float read_f32(std::istream& is, const std::string& what);
void read_bytes(std::istream& is, void* data, size_t n, const std::string& what);

}  // namespace bassl::io
