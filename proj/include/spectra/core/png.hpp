#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/core/pfm.hpp"

namespace spectra::png {

/// Decoded PNG with channel values scaled to [0,1].
struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0; // 1 (gray) or 3 (rgb); alpha is dropped
  std::vector<float> data;
};

namespace detail {

struct ReadCursor {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

inline void read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* c = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (c->pos + n > c->size) png_error(png, "truncated PNG");
  std::memcpy(out, c->data + c->pos, n);
  c->pos += n;
}

inline void write_fn(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(in), n);
}

inline void flush_fn(png_structp) {}

} // namespace detail

inline Decoded decode(const std::string& bytes, const std::string& what = "png") {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw LoadError(what + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError(what + ": libpng init failed");
  }
  Decoded out;
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  detail::ReadCursor cursor{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError(what + ": PNG decode failed");
  }
  png_set_read_fn(png, &cursor, detail::read_fn);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png); // little-endian 16-bit samples
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = png_get_channels(png, info);
  const int bit = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(h));
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const bool has_color = ch >= 3;
  out.width = w;
  out.height = h;
  out.channels = has_color ? 3 : 1;
  out.data.resize(static_cast<std::size_t>(w) * h * out.channels);
  const double maxv = bit == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < out.channels; ++c) {
        const std::size_t src = static_cast<std::size_t>(x) * ch + c;
        double v;
        if (bit == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[static_cast<std::size_t>(y)] + 2 * src, 2);
          v = s;
        } else {
          v = rows[static_cast<std::size_t>(y)][src];
        }
        out.data[(static_cast<std::size_t>(y) * w + x) * out.channels + c] =
            static_cast<float>(v / maxv);
      }
  return out;
}

/// Encodes 8-bit gray or RGB. Only IHDR/IDAT/IEND chunks are written, so identical
/// pixels always give identical bytes.
inline std::string encode8(int w, int h, int channels, const std::vector<float>& data) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng init failed");
  }
  std::string out;
  std::vector<unsigned char> buffer(static_cast<std::size_t>(w) * h * channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double v = std::clamp(static_cast<double>(data[i]), 0.0, 1.0);
    buffer[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<std::size_t>(y)] = buffer.data() + static_cast<std::size_t>(y) * w * channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed");
  }
  png_set_write_fn(png, &out, detail::write_fn, detail::flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

/// 16-bit gray encoder, used for lossless-ish synthetic datasets.
inline std::string encode16_gray(const GrayImage& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng init failed");
  }
  std::string out;
  const int w = img.width(), h = img.height();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(w) * h * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(
        std::lround(std::clamp(static_cast<double>(img[i]), 0.0, 1.0) * 65535.0));
    buffer[2 * i] = static_cast<unsigned char>(v >> 8);
    buffer[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<std::size_t>(y)] = buffer.data() + static_cast<std::size_t>(y) * w * 2;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed");
  }
  png_set_write_fn(png, &out, detail::write_fn, detail::flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::string encode(const GrayImage& img) {
  return encode8(img.width(), img.height(), 1, {img.begin(), img.end()});
}

inline std::string encode(const RgbImage& img) {
  std::vector<float> data;
  data.reserve(img.size() * 3);
  for (const auto& c : img) data.insert(data.end(), c.begin(), c.end());
  return encode8(img.width(), img.height(), 3, data);
}

template <class Img>
void write(const std::filesystem::path& path, const Img& img) {
  pfm::write_file(path, encode(img));
}

inline Decoded read(const std::filesystem::path& path) {
  return decode(pfm::read_file(path), path.string());
}

} // namespace spectra::png
