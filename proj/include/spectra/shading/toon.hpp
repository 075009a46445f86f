#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spectra/core/bilateral.hpp"
#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"

namespace spectra::shading {

struct KMeans1D {
  /// Ascending cluster centers.
  std::vector<double> centers;
  int iterations = 0;

  /// Center nearest to v; ties go to the lower center.
  double quantize(double v) const {
    auto it = std::lower_bound(centers.begin(), centers.end(), v);
    if (it == centers.end()) return centers.back();
    if (it == centers.begin()) return *it;
    const double hi = *it, lo = *(it - 1);
    return v - lo <= hi - v ? lo : hi;
  }
};

/// Lloyd iterations seeded at the (j + 0.5) / k quantiles. k must not exceed the number of
/// distinct values. Empty clusters keep their center.
inline KMeans1D kmeans_1d(std::vector<double> values, int k, int max_iterations = 50) {
  if (k < 1) throw ParameterError("kmeans_1d: k must be >= 1");
  if (values.empty()) throw ParameterError("kmeans_1d: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  KMeans1D km;
  for (int j = 0; j < k; ++j) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>((j + 0.5) / k * static_cast<double>(n)));
    km.centers.push_back(values[idx]);
  }
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(k), 0);
    std::size_t c = 0;
    for (double v : values) {
      while (c + 1 < km.centers.size() && v - km.centers[c] > km.centers[c + 1] - v) ++c;
      sum[c] += v;
      ++cnt[c];
    }
    std::vector<double> next = km.centers;
    for (std::size_t j = 0; j < next.size(); ++j)
      if (cnt[j]) next[j] = sum[j] / static_cast<double>(cnt[j]);
    std::sort(next.begin(), next.end());
    km.iterations = it + 1;
    const bool done = next == km.centers;
    km.centers = std::move(next);
    if (done) break;
  }
  return km;
}

struct ToonParams {
  int k = 4;
  Color3 blend{0.5f, 0.5f, 0.5f};
  LightDirection light = LightDirection::normalize({-0.3, -0.3, 0.9});
  BilateralParams bilateral{};
  int max_iterations = 50;
};

struct ToonResult {
  RgbImage image;
  KMeans1D clusters;
  int k_used = 0;
  std::vector<std::string> warnings;
};

/// Bilateral-filtered visible color and normals give a Lambertian shade; the NIR image is
/// quantized to k levels and added per channel times the blend color.
inline ToonResult nir_blend_toon(const RgbImage& color, const NormalMap& n, const GrayImage& nir,
                                 const ToonParams& p = {}) {
  if (p.k < 2) throw ParameterError("nir_blend_toon: k must be >= 2");
  require_same_shape(color, n.normals, "nir_blend_toon normals");
  require_same_shape(color, nir, "nir_blend_toon nir");
  ToonResult res;
  std::vector<double> values(nir.begin(), nir.end());
  std::vector<double> distinct = values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  res.k_used = std::min<int>(p.k, static_cast<int>(distinct.size()));
  if (res.k_used < p.k)
    res.warnings.push_back("k reduced from " + std::to_string(p.k) + " to " + std::to_string(res.k_used) +
                           ": not enough distinct NIR values");
  res.clusters = kmeans_1d(std::move(values), res.k_used, p.max_iterations);

  const auto [c, nf] = joint_bilateral_filter(color, n, p.bilateral);
  res.image = RgbImage(color.width(), color.height());
  for (std::size_t i = 0; i < color.size(); ++i) {
    const double s = nf.mask[i] ? std::max(dot(nf.normals[i], p.light.vec()), 0.0) : 0.0;
    const double q = res.clusters.quantize(nir[i]);
    for (std::size_t ch = 0; ch < 3; ++ch)
      res.image[i][ch] = static_cast<float>(std::clamp(c[i][ch] * s + p.blend[ch] * q, 0.0, 1.0));
  }
  return res;
}

} // namespace spectra::shading
