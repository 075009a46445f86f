#pragma once

#include <algorithm>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"
#include "spectra/enhancement/curvature.hpp"

namespace spectra::shading {

struct CurvatureShadeParams {
  /// Curvature scale for near-infrared bands; visible curvature uses 2Q.
  double Q = 10.0;
  enhancement::CurvatureMeasure measure = enhancement::CurvatureMeasure::mean;
  /// Per-level weights; empty means equal weights.
  std::vector<double> weights;

  void validate() const {
    if (!(Q > 0.0)) throw ParameterError("curvature_shade: Q must be > 0");
  }
};

/// 1/2 + 1/2 sum_x w_x ((1 - C_x) clamp(2Q k_vis) + C_x clamp(Q k_nir)), clamped to [0, 1].
/// Negative curvature darkens, positive brightens. Pixels invalid in a level's masks get no
/// contribution from that level.
inline GrayImage curvature_shade(const std::vector<Image<double>>& k_vis, const std::vector<Image<double>>& k_nir,
                                 const std::vector<GrayImage>& C, const std::vector<double>& weights, double Q,
                                 const std::vector<Mask>* masks = nullptr) {
  if (!(Q > 0.0)) throw ParameterError("curvature_shade: Q must be > 0");
  const std::size_t L = k_vis.size();
  if (L == 0 || k_nir.size() != L || C.size() != L || weights.size() != L || (masks && masks->size() != L))
    throw ParameterError("curvature_shade: need one entry per level");
  GrayImage out(k_vis.front().width(), k_vis.front().height(), 0.0f);
  std::vector<double> acc(out.size(), 0.0);
  for (std::size_t x = 0; x < L; ++x) {
    require_same_shape(out, k_vis[x], "curvature_shade vis");
    require_same_shape(out, k_nir[x], "curvature_shade nir");
    require_same_shape(out, C[x], "curvature_shade C");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (masks && !(*masks)[x][i]) continue;
      const double sv = std::clamp(2.0 * Q * k_vis[x][i], -1.0, 1.0);
      const double sn = std::clamp(Q * k_nir[x][i], -1.0, 1.0);
      acc[i] += weights[x] * ((1.0 - C[x][i]) * sv + C[x][i] * sn);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(std::clamp(0.5 + 0.5 * acc[i], 0.0, 1.0));
  return out;
}

/// Curvature maps per level for the visible and one near-infrared band.
inline GrayImage curvature_shade(const std::vector<enhancement::CurvatureMaps>& vis,
                                 const std::vector<enhancement::CurvatureMaps>& nir, const std::vector<GrayImage>& C,
                                 const CurvatureShadeParams& p) {
  p.validate();
  if (vis.empty() || nir.size() != vis.size()) throw ParameterError("curvature_shade: need one entry per level");
  std::vector<Image<double>> kv, kn;
  std::vector<Mask> masks;
  for (std::size_t x = 0; x < vis.size(); ++x) {
    kv.push_back(vis[x].field(p.measure));
    kn.push_back(nir[x].field(p.measure));
    Mask m(vis[x].width(), vis[x].height(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = vis[x].mask[i] && nir[x].mask[i];
    masks.push_back(std::move(m));
  }
  std::vector<double> w = p.weights;
  if (w.empty()) w.assign(vis.size(), 1.0 / static_cast<double>(vis.size()));
  return curvature_shade(kv, kn, C, w, p.Q, &masks);
}

} // namespace spectra::shading
