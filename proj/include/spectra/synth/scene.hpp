#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"

namespace spectra::synth {

/// Concentric circular grooves etched into the inner surface, centered on the sphere axis.
/// Each groove is a raised-cosine depression of the given depth and half-width.
struct GrooveSpec {
  std::vector<double> ring_radii_px;
  double half_width_px = 4.0;
  double depth_px = 2.0;

  static GrooveSpec rings(int count, double radius_px, double half_width_px, double depth_px) {
    GrooveSpec g;
    g.half_width_px = half_width_px;
    g.depth_px = depth_px;
    for (int k = 1; k <= count; ++k) g.ring_radii_px.push_back(radius_px * k / (count + 1.0));
    return g;
  }
};

/// Two layers over a shared footprint: the paint surface (gt_top) and the grooved
/// surface beneath it (gt_bottom).
struct LayeredScene {
  double radius_px = 0.0;
  double cx = 0.0, cy = 0.0;
  GrooveSpec grooves;
  double paint_thickness_px = 0.0;
  NormalMap gt_top;
  NormalMap gt_bottom;
  /// Pixels lying inside some groove's support.
  Mask groove_mask;

  int width() const { return gt_top.width(); }
  int height() const { return gt_top.height(); }
};

namespace detail {

/// Groove depth and its radial derivative at distance r from the axis.
inline std::pair<double, double> groove_profile(const GrooveSpec& g, double depth, double r) {
  double d = 0.0, dd = 0.0;
  const double w = g.half_width_px;
  for (double rk : g.ring_radii_px) {
    const double u = r - rk;
    if (std::abs(u) >= w) continue;
    d += depth * 0.5 * (1.0 + std::cos(kPi * u / w));
    dd += -depth * 0.5 * kPi / w * std::sin(kPi * u / w);
  }
  return {d, dd};
}

/// Normal of the height field h(x, y) = sqrt(R^2 - r^2) - groove(r).
inline Vec3 surface_normal(const GrooveSpec& g, double depth, double R, double dx, double dy) {
  const double r2 = dx * dx + dy * dy;
  const double z = std::sqrt(std::max(R * R - r2, 0.0));
  const double r = std::sqrt(r2);
  if (depth <= 0.0 || r == 0.0) return Vec3{dx, dy, z} / R;
  const double dd = groove_profile(g, depth, r).second;
  // Scaled gradient: multiply through by z to stay finite near the limb.
  const double hx = -dx - z * dd * dx / r;
  const double hy = -dy - z * dd * dy / r;
  return normalized({-hx, -hy, z});
}

} // namespace detail

/// Analytic sphere of the given radius centered in a (2R + 2*margin) square image.
/// Paint of thickness t fills the grooves, so the outer surface keeps grooves of depth
/// max(depth - t, 0). Pixels within 0.98 R of the axis are valid.
inline LayeredScene gen_layered_sphere(double radius_px, const GrooveSpec& grooves,
                                       double paint_thickness_px, int margin_px = 4) {
  if (radius_px < 16.0) throw ParameterError("gen_layered_sphere: radius must be >= 16 px");
  if (grooves.depth_px > radius_px)
    throw ParameterError("gen_layered_sphere: groove deeper than radius");
  if (grooves.depth_px < 0.0 || paint_thickness_px < 0.0)
    throw ParameterError("gen_layered_sphere: negative depth or thickness");
  if (!grooves.ring_radii_px.empty() && !(grooves.half_width_px > 0.0))
    throw ParameterError("gen_layered_sphere: groove half-width must be > 0");

  const int size = static_cast<int>(std::ceil(2.0 * radius_px)) + 2 * margin_px;
  LayeredScene s;
  s.radius_px = radius_px;
  s.cx = s.cy = 0.5 * (size - 1);
  s.grooves = grooves;
  s.paint_thickness_px = paint_thickness_px;
  s.gt_top = NormalMap(size, size);
  s.gt_bottom = NormalMap(size, size);
  s.groove_mask = Mask(size, size, 0);
  const double outer_depth = std::max(grooves.depth_px - paint_thickness_px, 0.0);
  const double limit = 0.98 * radius_px;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = x - s.cx, dy = y - s.cy;
      const double r = std::hypot(dx, dy);
      if (r > limit) continue;
      s.gt_bottom.set(x, y, detail::surface_normal(grooves, grooves.depth_px, radius_px, dx, dy));
      s.gt_top.set(x, y, detail::surface_normal(grooves, outer_depth, radius_px, dx, dy));
      for (double rk : grooves.ring_radii_px)
        if (std::abs(r - rk) < grooves.half_width_px) s.groove_mask(x, y) = 1;
    }
  s.gt_top.band = Band("gt_top", 0, 0, BandKind::visible_combined);
  s.gt_bottom.band = Band("gt_bottom", 0, 0, BandKind::nir);
  return s;
}

/// Plain sphere without grooves.
inline LayeredScene gen_sphere(double radius_px, int margin_px = 4) {
  return gen_layered_sphere(radius_px, {}, 0.0, margin_px);
}

/// Rig of 37 lights: zenith plus rings of 6, 12 and 18 lights at 75, 55 and 35 degrees
/// elevation.
inline std::vector<LightDirection> light_rig_37() {
  std::vector<LightDirection> out{LightDirection(0.0, 0.0, 1.0)};
  const std::pair<int, double> rings[] = {{6, 75.0}, {12, 55.0}, {18, 35.0}};
  for (const auto& [count, elev] : rings)
    for (int i = 0; i < count; ++i) {
      const double az = 2.0 * kPi * (i + 0.5 * (count == 12)) / count;
      out.push_back(LightDirection::from_angles(az, elev * kPi / 180.0));
    }
  return out;
}

} // namespace spectra::synth
