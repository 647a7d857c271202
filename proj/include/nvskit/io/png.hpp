#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "nvskit/image.hpp"

namespace nvskit::io {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& p, const char* mode) {
  FilePtr f(std::fopen(p.string().c_str(), mode));
  if (!f) throw PngError("cannot open " + p.string());
  return f;
}

// Writes 8- or 16-bit PNGs. `samples` holds big-endian-ready values; color
// type gray (1 channel) or RGB (3 channels).
inline void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
                      const std::vector<std::uint16_t>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw PngError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> row(static_cast<std::size_t>(width) * static_cast<std::size_t>(channels) * bytes_per_sample);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PngError("libpng error while writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t per_row = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (int y = 0; y < height; ++y) {
    for (std::size_t i = 0; i < per_row; ++i) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * per_row + i];
      if (bit_depth == 16) {
        row[2 * i] = static_cast<png_byte>(v >> 8);
        row[2 * i + 1] = static_cast<png_byte>(v & 0xFF);
      } else {
        row[i] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct RawPng {
  int width = 0, height = 0, channels = 0, bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

inline RawPng read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw PngError(path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw PngError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  RawPng out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw PngError("libpng error while reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  row.resize(png_get_rowbytes(png, info));
  const std::size_t per_row = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.channels);
  out.samples.resize(per_row * static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t i = 0; i < per_row; ++i)
      out.samples[static_cast<std::size_t>(y) * per_row + i] =
          out.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]) : row[i];
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace detail

/// 8-bit RGB or gray image, values rounded from [0,1].
inline void write_png(const std::filesystem::path& path, const ImageF& img) {
  if (img.channels != 1 && img.channels != 3) throw PngError("write_png: only gray or RGB images");
  std::vector<std::uint16_t> s(img.data.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  detail::write_png(path, img.width, img.height, img.channels, 8, s);
}

/// Raw 8-bit values (label maps, binary masks stored as 0/255 or ids).
inline void write_png_u8(const std::filesystem::path& path, const Image<std::uint8_t>& img) {
  detail::write_png(path, img.width, img.height, img.channels, 8,
                    std::vector<std::uint16_t>(img.data.begin(), img.data.end()));
}

inline void write_png_u16(const std::filesystem::path& path, const Image<std::uint16_t>& img) {
  detail::write_png(path, img.width, img.height, img.channels, 16, img.data);
}

inline ImageF read_png_float(const std::filesystem::path& path) {
  const auto raw = detail::read_png(path);
  ImageF img(raw.width, raw.height, raw.channels);
  const float scale = raw.bit_depth == 16 ? 65535.0f : 255.0f;
  for (std::size_t i = 0; i < raw.samples.size(); ++i) img.data[i] = raw.samples[i] / scale;
  return img;
}

inline Image<std::uint8_t> read_png_u8(const std::filesystem::path& path) {
  const auto raw = detail::read_png(path);
  if (raw.bit_depth != 8) throw PngError(path.string() + ": expected an 8-bit PNG");
  Image<std::uint8_t> img(raw.width, raw.height, raw.channels);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) img.data[i] = static_cast<std::uint8_t>(raw.samples[i]);
  return img;
}

inline Image<std::uint16_t> read_png_u16(const std::filesystem::path& path) {
  const auto raw = detail::read_png(path);
  if (raw.bit_depth != 16) throw PngError(path.string() + ": expected a 16-bit PNG");
  Image<std::uint16_t> img(raw.width, raw.height, raw.channels);
  img.data = raw.samples;
  return img;
}

}  // namespace nvskit::io
