#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/core/vec.hpp"

namespace spectra {

/// Reflects an out-of-range coordinate back into [0, n) (mirror without edge repeat).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Bilinear sample with reflected borders.
inline double sample_bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const int w = img.width(), h = img.height();
  auto px = [&](int xi, int yi) -> double {
    return img(reflect_index(xi, w), reflect_index(yi, h));
  };
  return (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) +
         fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
}

/// Keys cubic convolution (a = -0.5) with reflected borders. Unlike bilinear sampling it
/// is continuously differentiable in the sample position.
inline double sample_bicubic(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const int w = img.width(), h = img.height();
  auto taps = [](double t) {
    const double t2 = t * t, t3 = t2 * t;
    return std::array<double, 4>{-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1.0,
                                 -1.5 * t3 + 2.0 * t2 + 0.5 * t, 0.5 * t3 - 0.5 * t2};
  };
  const auto kx = taps(fx), ky = taps(fy);
  double out = 0.0;
  for (int j = 0; j < 4; ++j) {
    const int yi = reflect_index(y0 - 1 + j, h);
    double row = 0.0;
    for (int i = 0; i < 4; ++i) row += kx[static_cast<std::size_t>(i)] * img(reflect_index(x0 - 1 + i, w), yi);
    out += ky[static_cast<std::size_t>(j)] * row;
  }
  return out;
}

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
inline std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (sigma <= 0.0 || radius < 0) throw ParameterError("gaussian_kernel: sigma must be > 0");
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable masked convolution: only pixels with weight > 0 contribute, and the
/// result is renormalized by the accumulated kernel mass (normalized convolution).
/// T must support T + T and T * double.
template <class T>
Image<T> masked_separable_blur(const Image<T>& in, const Mask& mask, const std::vector<double>& k) {
  require_same_shape(in, mask, "masked_separable_blur");
  const int w = in.width(), h = in.height();
  const int r = static_cast<int>(k.size() / 2);
  Image<T> tmp(w, h);
  Image<double> tmp_mass(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T acc{};
      double mass = 0.0;
      for (int d = -r; d <= r; ++d) {
        const int xx = x + d;
        if (xx < 0 || xx >= w || !mask(xx, y)) continue;
        const double kw = k[static_cast<std::size_t>(d + r)];
        acc = acc + in(xx, y) * kw;
        mass += kw;
      }
      tmp(x, y) = acc;
      tmp_mass(x, y) = mass;
    }
  Image<T> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) {
        out(x, y) = in(x, y);
        continue;
      }
      T acc{};
      double mass = 0.0;
      for (int d = -r; d <= r; ++d) {
        const int yy = y + d;
        if (yy < 0 || yy >= h) continue;
        const double kw = k[static_cast<std::size_t>(d + r)];
        acc = acc + tmp(x, yy) * kw;
        mass += kw * tmp_mass(x, yy);
      }
      out(x, y) = mass > 0.0 ? acc * (1.0 / mass) : in(x, y);
    }
  return out;
}

/// Gaussian blur with clamped borders (no mask).
inline GrayImage gaussian_blur(const GrayImage& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto k = gaussian_kernel(sigma, radius);
  const int w = in.width(), h = in.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += k[static_cast<std::size_t>(d + radius)] * in.at_clamped(x + d, y);
      tmp(x, y) = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d)
        acc += k[static_cast<std::size_t>(d + radius)] * tmp.at_clamped(x, y + d);
      out(x, y) = static_cast<float>(acc);
    }
  return out;
}

/// Mean over the (2r+1)^2 window clipped at the borders. Summation runs in a fixed
/// order relative to the center pixel so translation-invariant inputs give equal sums.
inline Image<double> box_mean(const Image<double>& in, int r, const Mask* mask = nullptr) {
  const int w = in.width(), h = in.height();
  Image<double> out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!in.contains(xx, yy) || (mask && !(*mask)(xx, yy))) continue;
          acc += in(xx, yy);
          ++n;
        }
      out(x, y) = n ? acc / n : 0.0;
    }
  return out;
}

/// 3x3 Sobel derivatives normalized to unit-slope response (divided by 8), clamped borders.
template <class Sampler>
Vec2 sobel_at(Sampler&& f, int x, int y) {
  const double gx = (f(x + 1, y - 1) + 2.0 * f(x + 1, y) + f(x + 1, y + 1)) -
                    (f(x - 1, y - 1) + 2.0 * f(x - 1, y) + f(x - 1, y + 1));
  const double gy = (f(x - 1, y + 1) + 2.0 * f(x, y + 1) + f(x + 1, y + 1)) -
                    (f(x - 1, y - 1) + 2.0 * f(x, y - 1) + f(x + 1, y - 1));
  return {gx / 8.0, gy / 8.0};
}

/// Linear-interpolated percentile (q in [0,1]) of the values; values are reordered.
inline double percentile(std::vector<double>& v, double q) {
  if (v.empty()) throw ParameterError("percentile of empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

/// 2x downsample after a Gaussian prefilter.
inline GrayImage downsample(const GrayImage& in, double scale) {
  const GrayImage blurred = gaussian_blur(in, 0.5 / scale);
  const int w = std::max(1, static_cast<int>(std::lround(in.width() * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(in.height() * scale)));
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(x, y) = static_cast<float>(sample_bilinear(blurred, (x + 0.5) / scale - 0.5,
                                                     (y + 0.5) / scale - 0.5));
  return out;
}

} // namespace spectra
