#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"

namespace spectra::photometric {

/// Diffuse estimate of a highlighted image given s_o, a highlight-free image at the same
/// tilt angle.
///
/// The log difference log(s_h) - log(s_o) (both floored at eps) marks pixels carrying
/// specular excess above min_excess. The first iteration replaces flagged pixels by s_o.
/// Each later iteration visits flagged pixels from brightest to darkest and lowers each to
/// the value of its most diffuse 8-neighbor (smallest log excess) when that neighbor is
/// darker. iterations = 0 returns s_h.
inline GrayImage specular_free(const GrayImage& s_o, const GrayImage& s_h, int iterations,
                               double min_excess = 0.0, double eps = 1e-6) {
  require_same_shape(s_o, s_h, "specular_free");
  if (iterations < 0) throw ParameterError("specular_free: iterations must be >= 0");
  const int w = s_h.width();
  GrayImage out = s_h;
  if (iterations == 0) return out;
  std::vector<double> excess(s_h.size());
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < s_h.size(); ++i) {
    const double lh = std::log(std::max<double>(s_h[i], eps));
    const double lo = std::log(std::max<double>(s_o[i], eps));
    excess[i] = std::max(lh - lo, 0.0);
    if (excess[i] > min_excess) {
      out[i] = s_o[i];
      flagged.push_back(i);
    }
  }
  for (int it = 1; it < iterations && !flagged.empty(); ++it) {
    std::stable_sort(flagged.begin(), flagged.end(),
                     [&](std::size_t a, std::size_t b) { return out[a] > out[b]; });
    for (std::size_t i : flagged) {
      const int x = static_cast<int>(i % static_cast<std::size_t>(w));
      const int y = static_cast<int>(i / static_cast<std::size_t>(w));
      double best_excess = excess[i];
      float best_value = out[i];
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || !out.contains(x + dx, y + dy)) continue;
          const std::size_t j = static_cast<std::size_t>(y + dy) * w + static_cast<std::size_t>(x + dx);
          if (excess[j] < best_excess) {
            best_excess = excess[j];
            best_value = out[j];
          }
        }
      out[i] = std::min(out[i], best_value);
    }
  }
  return out;
}

} // namespace spectra::photometric
