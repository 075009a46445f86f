#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"

namespace spectra::synth {

struct ErrorReport {
  /// Degrees; 0 outside the valid mask.
  GrayImage error_deg;
  Mask valid;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  RgbImage heat_map;
};

/// Blue at 0 degrees through cyan, green and yellow to red at max_deg and beyond.
inline Color3 heat_color(double deg, double max_deg = 30.0) {
  const double t = std::clamp(deg / max_deg, 0.0, 1.0);
  const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
  const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
  const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

inline ErrorReport angular_error(const NormalMap& recovered, const NormalMap& truth,
                                 const Mask* restrict_to = nullptr) {
  require_same_shape(recovered.normals, truth.normals, "angular_error");
  const int w = truth.width(), h = truth.height();
  ErrorReport rep;
  rep.error_deg = GrayImage(w, h, 0.0f);
  rep.valid = Mask(w, h, 0);
  rep.heat_map = RgbImage(w, h, Color3{0.0f, 0.0f, 0.0f});
  std::vector<double> errs;
  double sum = 0.0;
  for (std::size_t i = 0; i < rep.error_deg.size(); ++i) {
    if (!recovered.mask[i] || !truth.mask[i]) continue;
    if (restrict_to && !(*restrict_to)[i]) continue;
    const double e = angle_deg(recovered.normals[i], truth.normals[i]);
    rep.error_deg[i] = static_cast<float>(e);
    rep.valid[i] = 1;
    rep.heat_map[i] = heat_color(e);
    errs.push_back(e);
    sum += e;
  }
  if (errs.empty()) throw ParameterError("angular_error: empty intersection mask");
  rep.count = errs.size();
  rep.mean = sum / static_cast<double>(errs.size());
  rep.max = *std::max_element(errs.begin(), errs.end());
  const std::size_t mid = errs.size() / 2;
  std::nth_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(mid), errs.end());
  rep.median = errs[mid];
  if (errs.size() % 2 == 0) {
    const double lo = *std::max_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(mid));
    rep.median = 0.5 * (rep.median + lo);
  }
  return rep;
}

} // namespace spectra::synth
