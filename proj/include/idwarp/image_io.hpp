#pragma once

// PNG reading and writing through libpng: 8-bit gray/RGB/RGBA images mapped
// to [0, 1] floats, binary masks, and raw 16-bit grayscale.

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "idwarp/types.hpp"

namespace idwarp {

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;                // 8 or 16
  std::vector<std::uint8_t> bytes;  // row-major, 16-bit samples big-endian
  std::vector<png_bytep> rows;      // scratch row pointers into `bytes`
  std::string error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_to_string(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = msg ? msg : "libpng error";
  png_longjmp(png, 1);
}

inline void png_warning_ignore(png_structp, png_const_charp) {}

// Everything that changes after setjmp lives in `out`, owned by the caller.
inline bool png_read_into(std::FILE* fp, bool force_8bit, RawPng& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &out.error, png_error_to_string, png_warning_ignore);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (force_8bit && depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.assign(stride * out.height, 0);
  out.rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) out.rows[y] = out.bytes.data() + stride * y;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_write_from(std::FILE* fp, RawPng& in) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &in.error, png_error_to_string, png_warning_ignore);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  const int color = in.channels == 1 ? PNG_COLOR_TYPE_GRAY
                    : in.channels == 3 ? PNG_COLOR_TYPE_RGB
                                       : PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(png, info, in.width, in.height, in.bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(in.width) * in.channels * (in.bit_depth / 8);
  in.rows.resize(in.height);
  for (int y = 0; y < in.height; ++y) in.rows[y] = in.bytes.data() + stride * y;
  png_write_image(png, in.rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline RawPng read_png_raw(const std::string& path, bool force_8bit) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw Error(ErrorKind::io, "'" + path + "' is not a PNG file");
  std::rewind(fp.get());
  RawPng out;
  if (!detail::png_read_into(fp.get(), force_8bit, out))
    throw Error(ErrorKind::io, "failed to decode '" + path + "': " + out.error);
  return out;
}

inline void write_png_raw(const std::string& path, RawPng png) {
  if (png.channels != 1 && png.channels != 3 && png.channels != 4)
    throw Error(ErrorKind::config, "write_png: unsupported channel count " + std::to_string(png.channels));
  if (png.width < 1 || png.height < 1) throw Error(ErrorKind::config, "write_png: empty image");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  if (!detail::png_write_from(fp.get(), png)) throw Error(ErrorKind::io, "failed to encode '" + path + "': " + png.error);
  if (std::fflush(fp.get()) != 0) throw Error(ErrorKind::io, "failed to write '" + path + "'");
}

// 8-bit image, values mapped to [0, 1] by v / 255.
inline FeatureMap read_image(const std::string& path) {
  const RawPng png = read_png_raw(path, true);
  FeatureMap img(png.height, png.width, png.channels);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(png.bytes[i]) / 255.0f;
  return img;
}

inline std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

inline void write_image(const std::string& path, const FeatureMap& img) {
  RawPng png;
  png.width = img.width;
  png.height = img.height;
  png.channels = img.channels;
  png.bytes.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) png.bytes[i] = to_byte(img.data[i]);
  write_png_raw(path, std::move(png));
}

// Gray PNG: 255 where mask is set, 0 elsewhere.
inline void write_mask(const std::string& path, const std::vector<std::uint8_t>& mask, int height, int width) {
  require_shape(mask.size() == static_cast<std::size_t>(height) * width, "write_mask: size mismatch");
  RawPng png;
  png.width = width;
  png.height = height;
  png.channels = 1;
  png.bytes.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) png.bytes[i] = mask[i] ? 255 : 0;
  write_png_raw(path, std::move(png));
}

inline std::vector<std::uint8_t> read_mask(const std::string& path, int& height, int& width) {
  const RawPng png = read_png_raw(path, true);
  if (png.channels != 1) throw Error(ErrorKind::io, "'" + path + "' is not a single-channel mask");
  height = png.height;
  width = png.width;
  std::vector<std::uint8_t> mask(png.bytes.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = png.bytes[i] != 0;
  return mask;
}

inline Tensor<std::uint16_t> read_gray16(const std::string& path) {
  const RawPng png = read_png_raw(path, false);
  if (png.bit_depth != 16 || png.channels != 1)
    throw Error(ErrorKind::io, "'" + path + "' is not a 16-bit single-channel PNG (bit depth " +
                                   std::to_string(png.bit_depth) + ", channels " + std::to_string(png.channels) + ")");
  Tensor<std::uint16_t> out(png.height, png.width, 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = static_cast<std::uint16_t>((png.bytes[2 * i] << 8) | png.bytes[2 * i + 1]);
  return out;
}

inline void write_gray16(const std::string& path, const Tensor<std::uint16_t>& img) {
  require_shape(img.channels == 1, "write_gray16: expected one channel");
  RawPng png;
  png.width = img.width;
  png.height = img.height;
  png.channels = 1;
  png.bit_depth = 16;
  png.bytes.resize(2 * img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    png.bytes[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
    png.bytes[2 * i + 1] = static_cast<std::uint8_t>(img.data[i] & 0xff);
  }
  write_png_raw(path, std::move(png));
}

}  // namespace idwarp
