#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spectra/core/color.hpp"
#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"

namespace spectra::photometric {

/// Scalar radiance model: camera sensitivity D and light spectrum L per band,
/// reflectance rho per point.
struct RadianceModel {
  double sensitivity = 1.0; // D
  double light = 1.0;       // L
  double reflectance = 1.0; // rho

  RadianceModel() = default;
  RadianceModel(double d, double l, double rho) : sensitivity(d), light(l), reflectance(rho) {
    if (!(d > 0.0) || !(l > 0.0) || !(rho >= 0.0))
      throw ParameterError("RadianceModel: D and L must be > 0, rho >= 0");
  }
};

/// D * rho * L * max(n . l, 0). The clamp models attached shadow.
inline double forward_radiance(const RadianceModel& m, const Vec3& n, const LightDirection& l) {
  return m.sensitivity * m.reflectance * m.light * std::max(dot(n, l.vec()), 0.0);
}

/// Per (band, light) boolean image, true where a specular highlight contaminates the pixel.
struct HighlightMask {
  std::string band;
  /// Indexed like the light list passed to solve_normals.
  std::vector<Mask> per_light;

  bool flagged(std::size_t light, int x, int y) const {
    return light < per_light.size() && !per_light[light].empty() && per_light[light](x, y) != 0;
  }
};

struct SolveParams {
  /// Observations below this intensity are treated as shadowed and dropped.
  double shadow_floor = 0.01;
  double damping = 1e-8;
  /// Pixels whose usable light matrix has det(L^T L) below this are masked out.
  double min_determinant = 1e-10;
};

inline void require_full_rank(std::span<const LightDirection> lights) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  for (const auto& l : lights) {
    const Eigen::Vector3d v(l.x(), l.y(), l.z());
    a += v * v.transpose();
  }
  if (lights.size() < 3 || a.determinant() < 1e-9)
    throw ConfigurationError("light set is rank deficient; need 3 non-coplanar lights");
}

/// Per-pixel damped least squares n' = argmin |E - L n'|^2, albedo = |n'|, normal = n'/|n'|.
/// Pixels with fewer than three usable (unmasked, unshadowed) lights are masked out.
inline NormalMap solve_normals(std::span<const GrayImage> images,
                               std::span<const LightDirection> lights,
                               const HighlightMask* highlight = nullptr,
                               const SolveParams& p = {}) {
  if (images.size() != lights.size())
    throw StructuralError("solve_normals: image and light counts differ");
  if (images.empty()) throw ConfigurationError("solve_normals: no images");
  require_full_rank(lights);
  const int w = images[0].width(), h = images[0].height();
  for (const auto& img : images) require_same_shape(img, images[0], "solve_normals images");

  NormalMap out(w, h);
  out.albedo = GrayImage(w, h, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
      Eigen::Vector3d b = Eigen::Vector3d::Zero();
      int used = 0;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const double e = images[i](x, y);
        if (e < p.shadow_floor) continue;
        if (highlight && highlight->flagged(i, x, y)) continue;
        const Eigen::Vector3d l(lights[i].x(), lights[i].y(), lights[i].z());
        a += l * l.transpose();
        b += e * l;
        ++used;
      }
      if (used < 3 || a.determinant() < p.min_determinant) continue;
      a += p.damping * Eigen::Matrix3d::Identity();
      const Eigen::Vector3d g = a.ldlt().solve(b);
      const double rho = g.norm();
      if (!(rho > 0.0) || !std::isfinite(rho)) continue;
      out.set(x, y, {g.x() / rho, g.y() / rho, g.z() / rho});
      (*out.albedo)(x, y) = static_cast<float>(rho);
    }
  return out;
}

/// Solves one band of a stack using its EV0 images; longer exposures are not used.
inline NormalMap solve_normals(const SpectralStack& stack, const std::string& band,
                               const HighlightMask* highlight = nullptr,
                               const SolveParams& p = {}) {
  std::vector<GrayImage> images;
  std::vector<LightDirection> lights;
  for (int l : stack.lights_for(band)) {
    images.push_back(stack.image(band, l, 0));
    lights.push_back(stack.lights.at(static_cast<std::size_t>(l)));
  }
  NormalMap n = solve_normals(images, lights, highlight, p);
  n.band = stack.band(band);
  return n;
}

/// Takes n_bis where the emission luminance exceeds y_th and n_bis is valid, n_vis elsewhere.
inline NormalMap combine_bispectral(const NormalMap& n_vis, const NormalMap& n_bis,
                                    const GrayImage& emission, double y_th = 0.25) {
  require_same_shape(n_vis.normals, n_bis.normals, "combine_bispectral normals");
  require_same_shape(n_vis.normals, emission, "combine_bispectral emission");
  NormalMap out = n_vis;
  for (std::size_t i = 0; i < emission.size(); ++i) {
    if (emission[i] > y_th && n_bis.mask[i]) {
      out.normals[i] = n_bis.normals[i];
      out.mask[i] = 1;
    }
  }
  return out;
}

inline NormalMap combine_bispectral(const NormalMap& n_vis, const NormalMap& n_bis,
                                    const RgbImage& emission, double y_th = 0.25) {
  return combine_bispectral(n_vis, n_bis, luminance(emission), y_th);
}

} // namespace spectra::photometric
