#ifndef GCNER_BINIO_H_
#define GCNER_BINIO_H_

// Little-endian primitives shared by the CTXE, GCNP and FUSE containers.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "gcner/errors.h"

namespace gcner::binio {

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {
      static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
      static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline void write_f32(std::ostream& out, float v) {
  write_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Throws TruncatedFile when the stream ends early. `what` names the field.
inline void read_exact(std::istream& in, char* dst, std::size_t n,
                       const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw TruncatedFile(std::string("truncated file while reading ") + what);
  }
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32(in, what));
}

// Reads four bytes and compares against `magic`.
inline void expect_magic(std::istream& in, std::string_view magic) {
  std::array<char, 4> b{};
  read_exact(in, b.data(), 4, "magic");
  if (std::string_view(b.data(), 4) != magic) {
    throw BadMagic("bad magic: expected '" + std::string(magic) + "'");
  }
}

}  // namespace gcner::binio

#endif  // GCNER_BINIO_H_
