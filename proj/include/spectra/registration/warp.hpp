#pragma once

#include <cmath>
#include <limits>

#include "spectra/core/filter.hpp"
#include "spectra/core/types.hpp"
#include "spectra/registration/align.hpp"

namespace spectra::registration {

struct WarpOptions {
  /// Fill holes from valid 8-neighbors averaged in slope space (n_x/n_z, n_y/n_z).
  bool fill_holes = false;
  double min_z = 1e-3;
};

/// Moves each valid normal of the band to its reference-frame pixel. The affine part H' of H
/// maps reference to band coordinates; the source at q lands on round(H'^-1 q - w). Vectors are
/// copied, never blended. When two sources land on one pixel the smaller displacement wins.
/// Pixels that receive nothing are masked out (or hole-filled when requested).
inline NormalMap warp_normal_map(const NormalMap& n, const Homography& H,
                                 const DisplacementField* field = nullptr,
                                 const WarpOptions& opt = {}) {
  const int w = n.width(), h = n.height();
  if (field && (field->width() != w || field->height() != h))
    throw StructuralError("warp_normal_map: field size differs from normal map");
  const Homography inv = H.affine().inverse();
  NormalMap out(w, h);
  out.band = n.band;
  Image<double> best(w, h, std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!n.valid(x, y)) continue;
      Vec2 p = inv.apply(x, y);
      if (field) {
        const int fx = static_cast<int>(std::lround(p.x)), fy = static_cast<int>(std::lround(p.y));
        if (field->contains(fx, fy)) p.x -= (*field)(fx, fy).x, p.y -= (*field)(fx, fy).y;
      }
      const int tx = static_cast<int>(std::lround(p.x)), ty = static_cast<int>(std::lround(p.y));
      if (!out.normals.contains(tx, ty)) continue;
      const double d = std::hypot(tx - x, ty - y);
      if (d < best(tx, ty)) {
        best(tx, ty) = d;
        out.set(tx, ty, n.normals(x, y));
      }
    }
  if (!opt.fill_holes) return out;

  NormalMap filled = out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (out.valid(x, y)) continue;
      double sx = 0, sy = 0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (!out.normals.contains(x + dx, y + dy) || !out.valid(x + dx, y + dy)) continue;
          const Vec3& v = out.normals(x + dx, y + dy);
          const double z = std::max(v.z, opt.min_z);
          sx += v.x / z, sy += v.y / z;
          ++cnt;
        }
      if (cnt >= 4) filled.set(x, y, normalized({sx / cnt, sy / cnt, 1.0}));
    }
  return filled;
}

} // namespace spectra::registration
