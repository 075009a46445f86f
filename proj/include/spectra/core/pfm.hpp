#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/core/types.hpp"

namespace spectra::pfm {

// Portable float map: "Pf" (1 channel) or "PF" (3 channels), little-endian (negative
// scale), rows stored bottom to top.

namespace detail {

inline bool host_little_endian() {
  const std::uint16_t v = 1;
  unsigned char b;
  std::memcpy(&b, &v, 1);
  return b == 1;
}

inline void put_float_le(std::ostream& os, float f) {
  unsigned char b[4];
  std::memcpy(b, &f, 4);
  if (!host_little_endian()) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline float get_float(const unsigned char* p, bool little) {
  unsigned char b[4] = {p[0], p[1], p[2], p[3]};
  if (little != host_little_endian()) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
  float f;
  std::memcpy(&f, b, 4);
  return f;
}

} // namespace detail

struct Raw {
  int width = 0;
  int height = 0;
  int channels = 0;
  /// Top-to-bottom, interleaved.
  std::vector<float> data;
};

inline std::string encode(const Raw& raw) {
  std::ostringstream os(std::ios::binary);
  os << (raw.channels == 3 ? "PF" : "Pf") << '\n'
     << raw.width << ' ' << raw.height << '\n'
     << "-1.0\n";
  const std::size_t row = static_cast<std::size_t>(raw.width) * raw.channels;
  for (int y = raw.height - 1; y >= 0; --y)
    for (std::size_t i = 0; i < row; ++i) detail::put_float_le(os, raw.data[y * row + i]);
  return os.str();
}

inline Raw decode(const std::string& bytes, const std::string& what = "pfm") {
  std::istringstream is(bytes);
  std::string magic;
  Raw raw;
  double scale = 0.0;
  if (!(is >> magic >> raw.width >> raw.height >> scale))
    throw LoadError(what + ": malformed PFM header");
  if (magic == "PF") raw.channels = 3;
  else if (magic == "Pf") raw.channels = 1;
  else throw LoadError(what + ": not a PFM file");
  if (raw.width <= 0 || raw.height <= 0 || scale == 0.0)
    throw LoadError(what + ": invalid PFM dimensions");
  is.get(); // single whitespace after scale
  const std::size_t offset = static_cast<std::size_t>(is.tellg());
  const std::size_t row = static_cast<std::size_t>(raw.width) * raw.channels;
  const std::size_t count = row * static_cast<std::size_t>(raw.height);
  if (bytes.size() < offset + count * 4) throw LoadError(what + ": truncated PFM data");
  raw.data.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  const bool little = scale < 0.0;
  for (int y = raw.height - 1; y >= 0; --y)
    for (std::size_t i = 0; i < row; ++i, p += 4)
      raw.data[static_cast<std::size_t>(y) * row + i] = detail::get_float(p, little);
  return raw;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Raw read(const std::filesystem::path& path) { return decode(read_file(path), path.string()); }

inline void write(const std::filesystem::path& path, const GrayImage& img) {
  Raw raw{img.width(), img.height(), 1, {img.begin(), img.end()}};
  write_file(path, encode(raw));
}

inline void write(const std::filesystem::path& path, const RgbImage& img) {
  Raw raw{img.width(), img.height(), 3, {}};
  raw.data.reserve(img.size() * 3);
  for (const auto& c : img) raw.data.insert(raw.data.end(), c.begin(), c.end());
  write_file(path, encode(raw));
}

/// Normals as raw 3-channel floats; invalid pixels are written as (0,0,0).
inline void write(const std::filesystem::path& path, const NormalMap& n) {
  Raw raw{n.width(), n.height(), 3, {}};
  raw.data.reserve(n.normals.size() * 3);
  for (std::size_t i = 0; i < n.normals.size(); ++i) {
    const Vec3 v = n.mask[i] ? n.normals[i] : Vec3{};
    raw.data.push_back(static_cast<float>(v.x));
    raw.data.push_back(static_cast<float>(v.y));
    raw.data.push_back(static_cast<float>(v.z));
  }
  write_file(path, encode(raw));
}

inline GrayImage to_gray(const Raw& raw) {
  GrayImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (raw.channels == 1) img[i] = raw.data[i];
    else
      img[i] = static_cast<float>(0.299 * raw.data[3 * i] + 0.587 * raw.data[3 * i + 1] +
                                  0.114 * raw.data[3 * i + 2]);
  }
  return img;
}

inline GrayImage read_gray(const std::filesystem::path& path) { return to_gray(read(path)); }

inline NormalMap read_normals(const std::filesystem::path& path) {
  const Raw raw = read(path);
  if (raw.channels != 3) throw LoadError(path.string() + ": normal map must have 3 channels");
  Image<Vec3> v(raw.width, raw.height);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = {raw.data[3 * i], raw.data[3 * i + 1], raw.data[3 * i + 2]};
  return NormalMap::from_vectors(v);
}

} // namespace spectra::pfm
