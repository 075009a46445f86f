#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"
#include "spectra/enhancement/map.hpp"

namespace spectra::enhancement {

enum class CurvatureMeasure {
  normal, // k_n = max(|k1|, |k2|)
  mean,   // H = (k1 + k2) / 2
};

/// Principal, mean and normal curvature per pixel, in 1/pixel. Positive where the surface
/// bulges toward the viewer.
struct CurvatureMaps {
  Image<double> k1, k2, mean, kn;
  /// Unit principal directions in image coordinates (x right, y down).
  Image<Vec2> dir1, dir2;
  Mask mask;
  Band band;

  CurvatureMaps() = default;
  CurvatureMaps(int w, int h)
      : k1(w, h, 0.0), k2(w, h, 0.0), mean(w, h, 0.0), kn(w, h, 0.0), dir1(w, h), dir2(w, h), mask(w, h, 0) {}

  int width() const { return k1.width(); }
  int height() const { return k1.height(); }

  /// The field fed to static enhancement.
  const Image<double>& field(CurvatureMeasure m = CurvatureMeasure::normal) const {
    return m == CurvatureMeasure::normal ? kn : mean;
  }
};

namespace detail {

inline Vec2 eigenvector(double a, double b, double c, double d, double lambda, bool first) {
  // [[a, b], [c, d]] v = lambda v
  Vec2 v;
  if (std::abs(b) >= std::abs(c) && std::abs(b) > 1e-15) {
    v = {b, lambda - a};
  } else if (std::abs(c) > 1e-15) {
    v = {lambda - d, c};
  } else {
    // Diagonal: k1 takes the axis of the larger entry, k2 the other.
    v = (a >= d) == first ? Vec2{1, 0} : Vec2{0, 1};
  }
  const double n = std::hypot(v.x, v.y);
  return n > 0.0 ? Vec2{v.x / n, v.y / n} : Vec2{first ? 1.0 : 0.0, first ? 0.0 : 1.0};
}

} // namespace detail

/// Weingarten map from Sobel derivatives of the slopes (-n_x/n_z, -n_y/n_z). Pixels need a
/// valid 3x3 neighborhood with n_z > min_z; a degenerate first fundamental form masks the pixel.
inline CurvatureMaps curvature_maps(const NormalMap& n, double min_z = 1e-3) {
  const int w = n.width(), h = n.height();
  CurvatureMaps out(w, h);
  out.band = n.band;
  Image<double> p(w, h, 0.0), q(w, h, 0.0);
  Mask ok(w, h, 0);
  for (std::size_t i = 0; i < n.normals.size(); ++i) {
    const Vec3& v = n.normals[i];
    if (!n.mask[i] || v.z <= min_z) continue;
    p[i] = -v.x / v.z;
    q[i] = -v.y / v.z;
    ok[i] = 1;
  }
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      bool full = true;
      for (int dy = -1; dy <= 1 && full; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (!ok(x + dx, y + dy)) {
            full = false;
            break;
          }
      if (!full) continue;
      auto sx = [&](const Image<double>& f) {
        return ((f(x + 1, y - 1) + 2.0 * f(x + 1, y) + f(x + 1, y + 1)) -
                (f(x - 1, y - 1) + 2.0 * f(x - 1, y) + f(x - 1, y + 1))) / 8.0;
      };
      auto sy = [&](const Image<double>& f) {
        return ((f(x - 1, y + 1) + 2.0 * f(x, y + 1) + f(x + 1, y + 1)) -
                (f(x - 1, y - 1) + 2.0 * f(x, y - 1) + f(x + 1, y - 1))) / 8.0;
      };
      const double pp = p(x, y), qq = q(x, y);
      const double E = 1.0 + pp * pp, F = pp * qq, G = 1.0 + qq * qq;
      const double det = E * G - F * F;
      if (det < 1e-12) continue;
      const double W = std::sqrt(1.0 + pp * pp + qq * qq);
      const double e = -sx(p) / W, f = -0.5 * (sy(p) + sx(q)) / W, g = -sy(q) / W;
      const double a = (e * G - f * F) / det, b = (f * G - g * F) / det;
      const double c = (f * E - e * F) / det, d = (g * E - f * F) / det;
      const double H = 0.5 * (a + d), K = a * d - b * c;
      const double disc = std::sqrt(std::max(H * H - K, 0.0));
      const double k1 = H + disc, k2 = H - disc;
      out.k1(x, y) = k1;
      out.k2(x, y) = k2;
      out.mean(x, y) = 0.5 * (k1 + k2);
      out.kn(x, y) = std::max(std::abs(k1), std::abs(k2));
      out.dir1(x, y) = detail::eigenvector(a, b, c, d, k1, true);
      out.dir2(x, y) = detail::eigenvector(a, b, c, d, k2, false);
      out.mask(x, y) = 1;
    }
  return out;
}

/// C = rho_th / (|K_vis| + |K_nir|) with rho = ||K_vis| - |K_nir|| where K_nir > K_vis;
/// rho below th and zero normalization give 0.
inline float curvature_weight(double k_vis, double k_nir, double th) {
  if (!(k_nir > k_vis)) return 0.0f;
  const double rho = std::abs(std::abs(k_vis) - std::abs(k_nir));
  const double eta = std::abs(k_vis) + std::abs(k_nir);
  if (rho < th || eta <= 0.0) return 0.0f;
  return static_cast<float>(std::min(rho / eta, 1.0));
}

inline EnhancementMap static_enhancement(const Image<double>& k_vis, const Image<double>& k_nir,
                                         double th = 0.02, const Mask* mask = nullptr) {
  require_same_shape(k_vis, k_nir, "static_enhancement");
  EnhancementMap out{GrayImage(k_vis.width(), k_vis.height(), 0.0f), EnhancementKind::static_curvature,
                     std::nullopt, 0, th, {}};
  for (std::size_t i = 0; i < k_vis.size(); ++i)
    if (!mask || (*mask)[i]) out.C[i] = curvature_weight(k_vis[i], k_nir[i], th);
  return out;
}

inline EnhancementMap static_enhancement(const CurvatureMaps& vis, const CurvatureMaps& nir, double th = 0.02,
                                         CurvatureMeasure measure = CurvatureMeasure::normal) {
  require_same_shape(vis.mask, nir.mask, "static_enhancement");
  Mask both(vis.width(), vis.height(), 0);
  for (std::size_t i = 0; i < both.size(); ++i) both[i] = vis.mask[i] && nir.mask[i];
  auto out = static_enhancement(vis.field(measure), nir.field(measure), th, &both);
  out.bands = {nir.band.label};
  return out;
}

/// Per pixel the band with the largest curvature competes against the visible field.
inline MultibandEnhancement multiband_static(const CurvatureMaps& vis, std::span<const CurvatureMaps> bands,
                                             double th = 0.02,
                                             CurvatureMeasure measure = CurvatureMeasure::normal) {
  if (bands.empty()) throw ParameterError("multiband_static: need at least one band");
  for (const auto& b : bands) require_same_shape(vis.mask, b.mask, "multiband_static");
  const int w = vis.width(), h = vis.height();
  MultibandEnhancement out{{GrayImage(w, h, 0.0f), EnhancementKind::static_curvature, std::nullopt, 0, th, {}},
                           Image<int>(w, h, -1)};
  std::vector<double> nm;
  for (const auto& b : bands) {
    nm.push_back(b.band.center_nm());
    out.map.bands.push_back(b.band.label);
  }
  std::vector<double> values(bands.size());
  std::vector<bool> usable(bands.size());
  for (std::size_t i = 0; i < out.map.C.size(); ++i) {
    for (std::size_t k = 0; k < bands.size(); ++k) {
      values[k] = bands[k].field(measure)[i];
      usable[k] = bands[k].mask[i] != 0;
    }
    const int win = detail::pick_winner(values, nm, usable);
    out.winner[i] = win;
    if (win >= 0 && vis.mask[i])
      out.map.C[i] = curvature_weight(vis.field(measure)[i], values[static_cast<std::size_t>(win)], th);
  }
  return out;
}

} // namespace spectra::enhancement
