#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "sde/errors.hpp"

namespace sde::io {

inline void write_u32_le(std::ostream& os, uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(bytes, 4);
}

inline void write_u64_le(std::ostream& os, uint64_t v) {
  write_u32_le(os, static_cast<uint32_t>(v & 0xFFFFFFFFu));
  write_u32_le(os, static_cast<uint32_t>(v >> 32));
}

inline void write_f32_le(std::ostream& os, float v) { write_u32_le(os, std::bit_cast<uint32_t>(v)); }
inline void write_f64_le(std::ostream& os, double v) { write_u64_le(os, std::bit_cast<uint64_t>(v)); }

inline uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("unexpected end of file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t read_u64_le(std::istream& is) {
  const uint64_t lo = read_u32_le(is);
  const uint64_t hi = read_u32_le(is);
  return lo | (hi << 32);
}

inline float read_f32_le(std::istream& is) { return std::bit_cast<float>(read_u32_le(is)); }
inline double read_f64_le(std::istream& is) { return std::bit_cast<double>(read_u64_le(is)); }

inline void expect_magic(std::istream& is, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw IoError("bad magic: expected " + magic);
  }
}

}  // namespace sde::io
