#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "lecb/error.hpp"

namespace lecb::io {

// Little-endian primitives for the binary file formats.

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("unexpected end of file");
  return to_little(v);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t max_len = 1u << 20) {
  const auto n = read_le<std::uint32_t>(is);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw FormatError("unexpected end of file");
  return s;
}

}  // namespace lecb::io
