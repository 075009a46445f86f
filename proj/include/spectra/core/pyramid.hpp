#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/filter.hpp"
#include "spectra/core/types.hpp"

namespace spectra {

struct PyramidParams {
  int levels = 6;
  int base_width_px = 2;
  /// Growth ratio of the Gaussian sigma between consecutive levels.
  double sigma_ratio = 2.0;
  /// Slopes are clamped to this z before the 1/z foreshortening correction.
  double min_z = 1e-3;
};

struct PyramidLevel {
  int window_px = 0;
  double sigma = 0.0;
  /// One entry per input band, same order as the input.
  std::vector<NormalMap> normals;
  RgbImage color;
};

/// Base layer plus progressively smoother levels. weights[x] = sigma_x / sum(sigma).
struct SmoothedPyramid {
  std::vector<PyramidLevel> levels;
  std::vector<double> weights;

  int size() const { return static_cast<int>(levels.size()); }
};

inline std::vector<double> normalized_widths(const std::vector<double>& sigmas) {
  double sum = 0.0;
  for (double s : sigmas) sum += s;
  std::vector<double> w;
  w.reserve(sigmas.size());
  for (double s : sigmas) w.push_back(s / sum);
  return w;
}

/// Smooths a normal map in slope space: n -> (nx/nz, ny/nz) with nz clamped to min_z,
/// masked Gaussian blur, then back to unit normals.
inline NormalMap smooth_normals(const NormalMap& n, const std::vector<double>& kernel,
                                double min_z = 1e-3) {
  Image<Vec3> slopes(n.width(), n.height());
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    if (!n.mask[i]) continue;
    const Vec3& v = n.normals[i];
    const double z = std::max(v.z, min_z);
    slopes[i] = {v.x / z, v.y / z, 1.0};
  }
  const Image<Vec3> blurred = masked_separable_blur(slopes, n.mask, kernel);
  NormalMap out = n;
  for (std::size_t i = 0; i < slopes.size(); ++i)
    if (out.mask[i]) out.normals[i] = normalized(blurred[i]);
  return out;
}

inline RgbImage blur_rgb(const RgbImage& c, const std::vector<double>& kernel) {
  Image<Vec3> v(c.width(), c.height());
  for (std::size_t i = 0; i < c.size(); ++i) v[i] = {c[i][0], c[i][1], c[i][2]};
  const Mask all(c.width(), c.height(), 1);
  const Image<Vec3> b = masked_separable_blur(v, all, kernel);
  RgbImage out(c.width(), c.height());
  for (std::size_t i = 0; i < c.size(); ++i)
    out[i] = {static_cast<float>(b[i].x), static_cast<float>(b[i].y), static_cast<float>(b[i].z)};
  return out;
}

/// Level x uses a window of base_width * 2^x pixels and a Gaussian sigma following a
/// geometric series (sigma_0 = base_width / 2, ratio sigma_ratio).
inline SmoothedPyramid build_pyramid(const std::vector<NormalMap>& bands, const RgbImage& color,
                                     const PyramidParams& p = {}) {
  if (p.levels < 1) throw ParameterError("build_pyramid: levels must be >= 1");
  if (p.base_width_px < 1) throw ParameterError("build_pyramid: base_width_px must be >= 1");
  if (p.sigma_ratio <= 0.0) throw ParameterError("build_pyramid: sigma_ratio must be > 0");
  for (const auto& b : bands) {
    require_same_shape(b.normals, bands.front().normals, "build_pyramid bands");
    if (!color.empty()) require_same_shape(b.normals, color, "build_pyramid color");
  }

  SmoothedPyramid pyr;
  std::vector<double> sigmas;
  for (int x = 0; x < p.levels; ++x) {
    PyramidLevel lvl;
    lvl.window_px = p.base_width_px << x;
    lvl.sigma = 0.5 * p.base_width_px * std::pow(p.sigma_ratio, x);
    const int radius = std::max(lvl.window_px, static_cast<int>(std::ceil(2.0 * lvl.sigma)));
    const auto kernel = gaussian_kernel(lvl.sigma, radius);
    for (const auto& b : bands) lvl.normals.push_back(smooth_normals(b, kernel, p.min_z));
    lvl.color = color.empty() ? color : blur_rgb(color, kernel);
    sigmas.push_back(lvl.sigma);
    pyr.levels.push_back(std::move(lvl));
  }
  pyr.weights = normalized_widths(sigmas);
  return pyr;
}

} // namespace spectra
