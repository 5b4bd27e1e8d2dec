#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "bobnet/errors.hpp"

namespace bobnet::io {

// Little-endian scalar I/O. Fast path on little-endian hosts, byte-by-byte
// otherwise, so file formats are identical everywhere.

inline void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("unexpected end of stream reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32le(os, bits);
}

inline float read_f32le(std::istream& is) {
  std::uint32_t bits = read_u32le(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void write_f32le_array(std::ostream& os, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_f32le(os, data[i]);
  }
}

inline void read_f32le_array(std::istream& is, float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4)))
      throw FormatError("unexpected end of stream reading f32 array");
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f32le(is);
  }
}

inline std::int16_t decode_i16le(const unsigned char* b) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) | (static_cast<std::uint16_t>(b[1]) << 8));
}

}  // namespace bobnet::io
