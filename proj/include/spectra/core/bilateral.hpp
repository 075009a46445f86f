#pragma once

#include <cmath>
#include <utility>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/core/types.hpp"

namespace spectra {

struct BilateralParams {
  int passes = 9;
  int window_px = 3;
  double sigma_domain = 0.25;
  double sigma_range = 5.0;
  double sigma_normal = 1.0;
};

namespace detail {

inline double range_distance2(float a, float b) {
  const double d = static_cast<double>(a) - b;
  return d * d;
}

inline double range_distance2(const Color3& a, const Color3& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(a[c]) - b[c];
    s += d * d;
  }
  return s;
}

inline void accumulate(double& acc, float v, double w) { acc += w * v; }
inline void accumulate(std::array<double, 3>& acc, const Color3& v, double w) {
  for (int c = 0; c < 3; ++c) acc[c] += w * v[c];
}
inline float finish(double acc, double wsum) { return static_cast<float>(acc / wsum); }
inline Color3 finish(const std::array<double, 3>& acc, double wsum) {
  return {static_cast<float>(acc[0] / wsum), static_cast<float>(acc[1] / wsum),
          static_cast<float>(acc[2] / wsum)};
}

template <class P>
using Accumulator = std::conditional_t<std::is_same_v<P, float>, double, std::array<double, 3>>;

} // namespace detail

/// Joint bilateral filter over a color image and a normal map. Each output pixel is a
/// convex combination of masked-in neighbors weighted by spatial distance (pixels),
/// color distance and normal distance. Normals are renormalized after every pass.
/// Masked-out pixels are left as they are in both outputs.
template <class Pixel>
std::pair<Image<Pixel>, NormalMap> joint_bilateral_filter(const Image<Pixel>& color,
                                                          const NormalMap& normals,
                                                          const BilateralParams& p = {}) {
  require_same_shape(color, normals.normals, "joint_bilateral_filter color/normals");
  if (p.window_px < 1 || p.window_px % 2 == 0)
    throw ParameterError("joint_bilateral_filter: window_px must be odd and >= 1");
  if (p.passes < 0) throw ParameterError("joint_bilateral_filter: passes must be >= 0");
  if (p.sigma_domain <= 0 || p.sigma_range <= 0 || p.sigma_normal <= 0)
    throw ParameterError("joint_bilateral_filter: kernel widths must be > 0");

  const int r = p.window_px / 2;
  const double kd = 1.0 / (2.0 * p.sigma_domain * p.sigma_domain);
  const double kr = 1.0 / (2.0 * p.sigma_range * p.sigma_range);
  const double kn = 1.0 / (2.0 * p.sigma_normal * p.sigma_normal);

  Image<Pixel> c = color;
  NormalMap n = normals;
  const int w = c.width(), h = c.height();
  for (int pass = 0; pass < p.passes; ++pass) {
    Image<Pixel> c_next = c;
    NormalMap n_next = n;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!n.valid(x, y)) continue;
        detail::Accumulator<Pixel> cacc{};
        Vec3 nacc{};
        double wsum = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (!c.contains(xx, yy) || !n.valid(xx, yy)) continue;
            const Vec3 dn = n.normals(xx, yy) - n.normals(x, y);
            const double wt = std::exp(-kd * (dx * dx + dy * dy) -
                                       kr * detail::range_distance2(c(xx, yy), c(x, y)) -
                                       kn * dot(dn, dn));
            detail::accumulate(cacc, c(xx, yy), wt);
            nacc += n.normals(xx, yy) * wt;
            wsum += wt;
          }
        c_next(x, y) = detail::finish(cacc, wsum);
        const Vec3 nn = normalized(nacc);
        if (nn == Vec3{}) n_next.invalidate(x, y);
        else n_next.normals(x, y) = nn;
      }
    c = std::move(c_next);
    n = std::move(n_next);
  }
  return {std::move(c), std::move(n)};
}

/// Gray bilateral filter: Gaussian spatial kernel (pixels, radius ceil(2 sigma_s)) times a
/// Gaussian range kernel. Masked-out pixels neither contribute nor change.
template <class T>
Image<T> bilateral_filter(const Image<T>& in, double sigma_s, double sigma_r, const Mask* mask = nullptr) {
  if (!(sigma_s > 0.0) || !(sigma_r > 0.0)) throw ParameterError("bilateral_filter: sigmas must be > 0");
  if (mask) require_same_shape(in, *mask, "bilateral_filter mask");
  const int w = in.width(), h = in.height(), r = static_cast<int>(std::ceil(2.0 * sigma_s));
  const double ks = 1.0 / (2.0 * sigma_s * sigma_s), kr = 1.0 / (2.0 * sigma_r * sigma_r);
  Image<T> out = in;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask && !(*mask)(x, y)) continue;
      const double c = in(x, y);
      double acc = 0.0, wsum = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!in.contains(xx, yy) || (mask && !(*mask)(xx, yy))) continue;
          const double d = in(xx, yy) - c;
          const double wt = std::exp(-ks * (dx * dx + dy * dy) - kr * d * d);
          acc += wt * in(xx, yy);
          wsum += wt;
        }
      out(x, y) = static_cast<T>(acc / wsum);
    }
  return out;
}

} // namespace spectra
