#pragma once

#include <algorithm>
#include <cmath>

#include "spectra/core/error.hpp"
#include "spectra/core/filter.hpp"
#include "spectra/core/types.hpp"
#include "spectra/enhancement/curvature.hpp"

namespace spectra::shading {

struct LineParams {
  int mean_radius = 3;
  /// Side of the square neighborhood searched for minima.
  int neighborhood = 7;
  double darker_fraction = 0.80;
  double view_threshold = 0.9;
  double normal_threshold = 0.9;
  Vec3 view{0.0, 0.0, 1.0};
  /// Mark pixels most of whose neighbors are darker instead of local minima.
  bool literal_darker = false;
  /// Require a neighborhood minimum on top of the brighter-fraction test.
  bool strict_minimum = true;
  /// Smallest |k1| (1/pixel) a principal line may carry.
  double curvature_floor = 0.01;

  void validate() const {
    if (mean_radius < 0) throw ParameterError("lines: mean_radius must be >= 0");
    if (neighborhood < 3 || neighborhood % 2 == 0) throw ParameterError("lines: neighborhood must be odd and >= 3");
    for (double t : {darker_fraction, view_threshold, normal_threshold})
      if (!(t > 0.0 && t <= 1.0)) throw ParameterError("lines: thresholds must be in (0, 1]");
    if (!(curvature_floor >= 0.0)) throw ParameterError("lines: curvature_floor must be >= 0");
  }
};

/// Suggestive contours of a head-lit image: after a masked mean filter, a pixel is marked when
/// it is the minimum of its neighborhood and at least darker_fraction of its valid neighbors
/// are brighter. Values within a relative 1e-9 count as equal.
inline Mask suggestive_contours(const Image<double>& headlit, const Mask& mask, const LineParams& p = {}) {
  p.validate();
  require_same_shape(headlit, mask, "suggestive_contours");
  const Image<double> I = p.mean_radius > 0 ? box_mean(headlit, p.mean_radius, &mask) : headlit;
  const int w = I.width(), h = I.height(), r = p.neighborhood / 2;
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      const double c = I(x, y), tol = 1e-9 * std::abs(c);
      int n = 0, brighter = 0, darker = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if ((dx == 0 && dy == 0) || !I.contains(x + dx, y + dy) || !mask(x + dx, y + dy)) continue;
          const double v = I(x + dx, y + dy);
          ++n;
          brighter += v > c + tol;
          darker += v < c - tol;
        }
      if (n == 0) continue;
      if (p.literal_darker)
        out(x, y) = darker >= p.darker_fraction * n;
      else
        out(x, y) = (!p.strict_minimum || darker == 0) && brighter >= p.darker_fraction * n;
    }
  return out;
}

inline Mask suggestive_contours(const NormalMap& n, const LineParams& p = {}) {
  Image<double> headlit(n.width(), n.height(), 0.0);
  for (std::size_t i = 0; i < headlit.size(); ++i)
    if (n.mask[i]) headlit[i] = dot(n.normals[i], p.view);
  return suggestive_contours(headlit, n.mask, p);
}

/// The view test for discontinuity lines: a normal counts as facing the viewer when
/// n . v > 1 - view_threshold.
inline bool facing_view(const Vec3& n, const Vec3& v, double view_threshold) {
  return dot(n, v) > 1.0 - view_threshold;
}

/// Marks pixels whose normal differs from a valid 4-neighbor (n_p . n_q below the normal
/// threshold) and faces the viewer.
inline Mask discontinuity_lines(const NormalMap& n, const LineParams& p = {}) {
  p.validate();
  const Vec3 v = normalized(p.view);
  Mask out(n.width(), n.height(), 0);
  const int off[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int y = 0; y < n.height(); ++y)
    for (int x = 0; x < n.width(); ++x) {
      if (!n.valid(x, y) || !facing_view(n.normals(x, y), v, p.view_threshold)) continue;
      double lo = 1.0;
      for (const auto& o : off) {
        const int xx = x + o[0], yy = y + o[1];
        if (n.normals.contains(xx, yy) && n.valid(xx, yy)) lo = std::min(lo, dot(n.normals(x, y), n.normals(xx, yy)));
      }
      out(x, y) = lo < p.normal_threshold;
    }
  return out;
}

/// Ridges of |k1|: directional non-maximum suppression along the k1 principal direction,
/// sampling one pixel to either side. Sides that fall outside the valid mask are ignored.
inline Mask principal_curvature_lines(const enhancement::CurvatureMaps& k, const LineParams& p = {}) {
  p.validate();
  const int w = k.width(), h = k.height();
  auto sample = [&](double x, double y, double& v) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    double acc = 0.0;
    for (int j = 0; j <= 1; ++j)
      for (int i = 0; i <= 1; ++i) {
        const double wt = (i ? fx : 1.0 - fx) * (j ? fy : 1.0 - fy);
        if (wt == 0.0) continue;
        if (!k.mask.contains(x0 + i, y0 + j) || !k.mask(x0 + i, y0 + j)) return false;
        acc += wt * std::abs(k.k1(x0 + i, y0 + j));
      }
    v = acc;
    return true;
  };
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!k.mask(x, y)) continue;
      const double c = std::abs(k.k1(x, y));
      if (c < p.curvature_floor) continue;
      const Vec2 d = k.dir1(x, y);
      double fwd = 0.0, back = 0.0;
      const bool has_f = sample(x + d.x, y + d.y, fwd), has_b = sample(x - d.x, y - d.y, back);
      if (!has_f && !has_b) continue;
      out(x, y) = (!has_f || c > fwd) && (!has_b || c >= back);
    }
  return out;
}

} // namespace spectra::shading
