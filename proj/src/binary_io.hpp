#pragma once

// Fixed little-endian encoding helpers shared by the binary readers/writers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mfgvo/grid.hpp"

namespace mfgvo::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return out;
  } else {
    return v;
  }
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void put_f32(std::ostream& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline void put_f64(std::ostream& out, double d) {
  auto v = to_little(std::bit_cast<std::uint64_t>(d));
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline void get_bytes(std::istream& in, void* dst, std::size_t n,
                      const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string(what) + ": truncated input");
  }
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v;
  get_bytes(in, &v, 4, what);
  return to_little(v);
}

inline float get_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(get_u32(in, what));
}

inline double get_f64(std::istream& in, const char* what) {
  std::uint64_t v;
  get_bytes(in, &v, 8, what);
  return std::bit_cast<double>(to_little(v));
}

inline void expect_magic(std::istream& in, const char (&magic)[5],
                         const char* what) {
  char buf[4];
  get_bytes(in, buf, 4, what);
  if (std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(std::string(what) + ": bad magic, expected \"" + magic +
                      "\"");
  }
}

inline void expect_eof(std::istream& in, const char* what) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(std::string(what) + ": trailing bytes after payload");
  }
}

}  // namespace mfgvo::detail
