#pragma once

// Middlebury .flo optical flow files:
//   float32 magic 202021.25 ("PIEH"), int32 width, int32 height,
//   then height*width interleaved (u, v) float32 pairs, row-major.
// All fields little-endian regardless of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "idwarp/types.hpp"

namespace idwarp {

inline constexpr float kFloMagic = 202021.25f;
// Middlebury convention for unknown flow.
inline constexpr float kFloUnknown = 1e10f;

struct FloImage {
  int width = 0;
  int height = 0;
  std::vector<float> uv;  // interleaved

  bool operator==(const FloImage&) const = default;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

// Behind-camera pixels are written as unknown flow.
inline FloImage to_flo(const FlowField& field) {
  FloImage out{field.width, field.height, std::vector<float>(2 * field.u.size())};
  for (std::size_t i = 0; i < field.u.size(); ++i) {
    const bool unknown = field.status[i] == FlowStatus::behind_camera;
    out.uv[2 * i] = unknown ? kFloUnknown : static_cast<float>(field.u[i].x());
    out.uv[2 * i + 1] = unknown ? kFloUnknown : static_cast<float>(field.u[i].y());
  }
  return out;
}

inline std::vector<std::uint8_t> encode_flo(const FloImage& flo) {
  require_shape(flo.width > 0 && flo.height > 0, "encode_flo: empty flow image");
  require_shape(flo.uv.size() == 2 * static_cast<std::size_t>(flo.width) * flo.height,
                "encode_flo: data size does not match dimensions");
  std::vector<std::uint8_t> buf;
  buf.reserve(12 + 4 * flo.uv.size());
  detail::put_u32(buf, std::bit_cast<std::uint32_t>(kFloMagic));
  detail::put_u32(buf, static_cast<std::uint32_t>(flo.width));
  detail::put_u32(buf, static_cast<std::uint32_t>(flo.height));
  for (float v : flo.uv) detail::put_u32(buf, std::bit_cast<std::uint32_t>(v));
  return buf;
}

inline FloImage decode_flo(const std::vector<std::uint8_t>& buf, const std::string& name = "<buffer>") {
  if (buf.size() < 12) throw Error(ErrorKind::io, name + ": truncated .flo header");
  if (std::bit_cast<float>(detail::get_u32(buf.data())) != kFloMagic)
    throw Error(ErrorKind::io, name + ": bad .flo magic number");
  const auto w = static_cast<std::int32_t>(detail::get_u32(buf.data() + 4));
  const auto h = static_cast<std::int32_t>(detail::get_u32(buf.data() + 8));
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
    throw Error(ErrorKind::io, name + ": implausible .flo dimensions");
  const std::size_t n = 2 * static_cast<std::size_t>(w) * h;
  if (buf.size() != 12 + 4 * n) throw Error(ErrorKind::io, name + ": .flo size does not match its header");
  FloImage out{w, h, std::vector<float>(n)};
  for (std::size_t i = 0; i < n; ++i) out.uv[i] = std::bit_cast<float>(detail::get_u32(buf.data() + 12 + 4 * i));
  return out;
}

inline void write_flo(const std::string& path, const FloImage& flo) {
  const auto buf = encode_flo(flo);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error(ErrorKind::io, "failed to write '" + path + "'");
}

inline FloImage read_flo(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_flo(buf, path);
}

}  // namespace idwarp
