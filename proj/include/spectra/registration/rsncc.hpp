#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spectra/core/filter.hpp"
#include "spectra/core/types.hpp"
#include "spectra/registration/homography.hpp"

namespace spectra::registration {

struct RsnccParams {
  int patch_radius = 5;
  double tau = 0.5;
  double lambda1 = 0.1;
  double lambda2 = 0.05;
  int pyramid_levels = 4;
  double pyramid_scale = 0.5;
  /// Charbonnier epsilon for rho.
  double robust_eps = 1e-3;
  /// Floor on |w_p - w_q| in the reweighting of both smoothness terms.
  double smooth_eps = 0.5;
  /// Coarsest pyramid level keeps at least this many pixels on its short side.
  int min_level_size = 32;
  /// Grid search half-ranges at full resolution.
  double search_translation_px = 12.0;
  double search_rotation_deg = 6.0;
  int max_iterations = 30;
  /// Mean per-pixel cost above which alignment is reported as failed.
  double max_mean_cost = 0.6;

  void validate() const {
    if (patch_radius < 1 || tau <= 0 || lambda1 <= 0 || lambda2 <= 0 || pyramid_levels < 1 ||
        !(pyramid_scale > 0 && pyramid_scale < 1) || robust_eps <= 0 || smooth_eps <= 0)
      throw ParameterError("RsnccParams: all parameters must be positive");
  }
};

inline double charbonnier(double x, double eps) { return std::sqrt(x * x + eps * eps) - eps; }

/// Normalized cross correlation of two equally long samples; 0 when either has zero variance.
inline double ncc(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sa += a[i], sb += b[i];
  const double ma = sa / n, mb = sb / n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 1e-14 * n || sbb <= 1e-14 * n) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// RSNCC cost of matching the patch of I1 around p with the patch of I2 around p + w.
/// I2 is sampled by cubic convolution with reflected borders; gradients are central
/// differences.
inline double rsncc_cost(const GrayImage& i1, const GrayImage& i2, int px, int py, Vec2 w,
                         const RsnccParams& params = {}) {
  const int r = params.patch_radius;
  std::vector<double> a, b, ga, gb;
  auto s1 = [&](double x, double y) { return sample_bilinear(i1, x, y); };
  auto s2 = [&](double x, double y) { return sample_bicubic(i2, x + w.x, y + w.y); };
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double x = px + dx, y = py + dy;
      a.push_back(s1(x, y));
      b.push_back(s2(x, y));
    }
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double x = px + dx, y = py + dy;
      ga.push_back(0.5 * (s1(x + 1, y) - s1(x - 1, y)));
      gb.push_back(0.5 * (s2(x + 1, y) - s2(x - 1, y)));
    }
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double x = px + dx, y = py + dy;
      ga.push_back(0.5 * (s1(x, y + 1) - s1(x, y - 1)));
      gb.push_back(0.5 * (s2(x, y + 1) - s2(x, y - 1)));
    }
  const double phi_i = ncc(a, b), phi_g = ncc(ga, gb);
  return charbonnier(1.0 - std::abs(phi_i), params.robust_eps) +
         params.tau * charbonnier(1.0 - std::abs(phi_g), params.robust_eps);
}

namespace detail {

/// Summed-area table with one extra leading row and column.
struct Integral {
  int w = 0, h = 0;
  std::vector<double> s;

  template <class F>
  Integral(int w_, int h_, F&& f) : w(w_), h(h_), s(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0.0) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += f(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }
  double& at(int x, int y) { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  double at(int x, int y) const { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  /// Sum over [x0, x1] x [y0, y1], clipped to the image.
  double box(int x0, int y0, int x1, int y1) const {
    x0 = std::max(x0, 0), y0 = std::max(y0, 0);
    x1 = std::min(x1, w - 1), y1 = std::min(y1, h - 1);
    if (x0 > x1 || y0 > y1) return 0.0;
    return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
  }
};

inline double ncc_from_sums(double n, double sa, double sb, double saa, double sbb, double sab) {
  const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
  if (va <= 1e-14 * n || vb <= 1e-14 * n) return 0.0;
  return (sab - sa * sb / n) / std::sqrt(va * vb);
}

} // namespace detail

/// Per-pixel RSNCC cost between I1 and an already warped J on the same grid. Windows are
/// clipped at the borders and restricted to pixels where `valid` is set (all when null).
/// Pixels without a valid center get cost -1.
inline Image<double> rsncc_cost_map(const GrayImage& i1, const GrayImage& j,
                                    const RsnccParams& params = {}, const Mask* valid = nullptr) {
  require_same_shape(i1, j, "rsncc_cost_map");
  const int w = i1.width(), h = i1.height();
  auto ok = [&](int x, int y) { return !valid || (*valid)(x, y) != 0; };
  auto grad = [&](const GrayImage& img, int x, int y, bool dx) {
    if (dx) return 0.5 * (img(reflect_index(x + 1, w), y) - img(reflect_index(x - 1, w), y));
    return 0.5 * (img(x, reflect_index(y + 1, h)) - img(x, reflect_index(y - 1, h)));
  };
  Image<double> gxa(w, h), gya(w, h), gxb(w, h), gyb(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gxa(x, y) = grad(i1, x, y, true);
      gya(x, y) = grad(i1, x, y, false);
      gxb(x, y) = grad(j, x, y, true);
      gyb(x, y) = grad(j, x, y, false);
    }
  using detail::Integral;
  auto m = [&](int x, int y) { return ok(x, y) ? 1.0 : 0.0; };
  const Integral n(w, h, m);
  const Integral sa(w, h, [&](int x, int y) { return m(x, y) * i1(x, y); });
  const Integral sb(w, h, [&](int x, int y) { return m(x, y) * j(x, y); });
  const Integral saa(w, h, [&](int x, int y) { return m(x, y) * i1(x, y) * i1(x, y); });
  const Integral sbb(w, h, [&](int x, int y) { return m(x, y) * j(x, y) * j(x, y); });
  const Integral sab(w, h, [&](int x, int y) { return m(x, y) * i1(x, y) * j(x, y); });
  const Integral ga(w, h, [&](int x, int y) { return m(x, y) * (gxa(x, y) + gya(x, y)); });
  const Integral gb(w, h, [&](int x, int y) { return m(x, y) * (gxb(x, y) + gyb(x, y)); });
  const Integral gaa(w, h, [&](int x, int y) {
    return m(x, y) * (gxa(x, y) * gxa(x, y) + gya(x, y) * gya(x, y));
  });
  const Integral gbb(w, h, [&](int x, int y) {
    return m(x, y) * (gxb(x, y) * gxb(x, y) + gyb(x, y) * gyb(x, y));
  });
  const Integral gab(w, h, [&](int x, int y) {
    return m(x, y) * (gxa(x, y) * gxb(x, y) + gya(x, y) * gyb(x, y));
  });
  const int r = params.patch_radius;
  Image<double> out(w, h, -1.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!ok(x, y)) continue;
      const int x0 = x - r, y0 = y - r, x1 = x + r, y1 = y + r;
      const double cnt = n.box(x0, y0, x1, y1);
      const double phi_i = detail::ncc_from_sums(cnt, sa.box(x0, y0, x1, y1), sb.box(x0, y0, x1, y1),
                                                 saa.box(x0, y0, x1, y1), sbb.box(x0, y0, x1, y1),
                                                 sab.box(x0, y0, x1, y1));
      const double phi_g = detail::ncc_from_sums(2.0 * cnt, ga.box(x0, y0, x1, y1), gb.box(x0, y0, x1, y1),
                                                 gaa.box(x0, y0, x1, y1), gbb.box(x0, y0, x1, y1),
                                                 gab.box(x0, y0, x1, y1));
      out(x, y) = charbonnier(1.0 - std::abs(phi_i), params.robust_eps) +
                  params.tau * charbonnier(1.0 - std::abs(phi_g), params.robust_eps);
    }
  return out;
}

/// Samples src at H(p + field(p)) for every reference pixel p. `inside` marks samples that
/// landed within the source frame, pixel footprints included.
inline GrayImage warp_image(const GrayImage& src, const Homography& H, int out_w, int out_h,
                            const Image<Vec2>* field = nullptr, Mask* inside = nullptr) {
  GrayImage out(out_w, out_h, 0.0f);
  if (inside) *inside = Mask(out_w, out_h, 0);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double px = x, py = y;
      if (field) px += (*field)(x, y).x, py += (*field)(x, y).y;
      const Vec2 q = H.apply(px, py);
      out(x, y) = static_cast<float>(sample_bicubic(src, q.x, q.y));
      if (inside && q.x >= -0.5 && q.y >= -0.5 && q.x <= src.width() - 0.5 && q.y <= src.height() - 0.5)
        (*inside)(x, y) = 1;
    }
  return out;
}

/// Per-pixel 80th percentile (by default) across a band's EV0 images.
inline GrayImage composite_image(const SpectralStack& stack, const std::string& band,
                                 double q = 0.8) {
  const auto lights = stack.lights_for(band);
  if (lights.empty()) throw ParameterError("composite_image: band '" + band + "' has no lights");
  GrayImage out(stack.width(), stack.height());
  std::vector<double> v(lights.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < lights.size(); ++k) v[k] = stack.image(band, lights[k])[i];
    out[i] = static_cast<float>(percentile(v, q));
  }
  return out;
}

} // namespace spectra::registration
