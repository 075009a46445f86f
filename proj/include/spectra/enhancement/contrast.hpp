#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/types.hpp"
#include "spectra/enhancement/map.hpp"

namespace spectra::enhancement {

/// chi = clamp(n . l, 0, 1) for one band and one light.
struct LambertianMap {
  GrayImage chi;
  Mask mask;
  LightDirection light;
};

inline LambertianMap lambertian_map(const NormalMap& n, const LightDirection& l) {
  LambertianMap out{GrayImage(n.width(), n.height(), 0.0f), n.mask, l};
  for (std::size_t i = 0; i < n.normals.size(); ++i)
    if (n.mask[i]) out.chi[i] = static_cast<float>(std::clamp(dot(n.normals[i], l.vec()), 0.0, 1.0));
  return out;
}

/// Michelson modulation over a (2r+1)^2 window.
struct ContrastMap {
  GrayImage m;
  int radius = 1;
};

namespace detail {

// Separable running extremum over valid pixels; invalid pixels hold +-inf sentinels.
inline Image<double> window_extremum(const Image<double>& in, int r, bool take_max) {
  const int w = in.width(), h = in.height();
  auto pick = [take_max](double a, double b) { return take_max ? std::max(a, b) : std::min(a, b); };
  const double none = take_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  Image<double> rows(w, h, none), out(w, h, none);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = none;
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k) v = pick(v, in(k, y));
      rows(x, y) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = none;
      for (int k = std::max(0, y - r); k <= std::min(h - 1, y + r); ++k) v = pick(v, rows(x, k));
      out(x, y) = v;
    }
  return out;
}

} // namespace detail

/// m = (L_max - L_min) / (L_max + L_min) over the window clipped at borders. Masked-out pixels
/// are excluded from windows and get m = 0, as do windows whose extremes sum to zero.
inline ContrastMap michelson_contrast(const GrayImage& chi, int r, const Mask* mask = nullptr) {
  if (r < 1) throw ParameterError("michelson_contrast: r must be >= 1");
  if (mask) require_same_shape(chi, *mask, "michelson_contrast mask");
  const int w = chi.width(), h = chi.height();
  auto ok = [&](std::size_t i) { return !mask || (*mask)[i] != 0; };
  Image<double> lo(w, h), hi(w, h);
  for (std::size_t i = 0; i < chi.size(); ++i) {
    lo[i] = ok(i) ? chi[i] : std::numeric_limits<double>::infinity();
    hi[i] = ok(i) ? chi[i] : -std::numeric_limits<double>::infinity();
  }
  const auto mn = detail::window_extremum(lo, r, false);
  const auto mx = detail::window_extremum(hi, r, true);
  ContrastMap out{GrayImage(w, h, 0.0f), r};
  for (std::size_t i = 0; i < chi.size(); ++i) {
    if (!ok(i)) continue;
    const double s = mx[i] + mn[i];
    if (s > 0.0) out.m[i] = static_cast<float>((mx[i] - mn[i]) / s);
  }
  return out;
}

inline ContrastMap michelson_contrast(const LambertianMap& chi, int r) {
  return michelson_contrast(chi.chi, r, &chi.mask);
}

/// C = phi where m_nir > m_vis and phi = |m_vis - m_nir| >= th, else 0.
inline float contrast_weight(double m_vis, double m_nir, double th) {
  const double phi = std::abs(m_vis - m_nir);
  return m_nir > m_vis && phi >= th ? static_cast<float>(std::min(phi, 1.0)) : 0.0f;
}

inline EnhancementMap dynamic_enhancement(const NormalMap& n_vis, const NormalMap& n_nir,
                                          const LightDirection& l, int r = 13, double th = 0.1) {
  require_same_shape(n_vis.normals, n_nir.normals, "dynamic_enhancement");
  const auto m_vis = michelson_contrast(lambertian_map(n_vis, l), r);
  const auto m_nir = michelson_contrast(lambertian_map(n_nir, l), r);
  EnhancementMap out{GrayImage(n_vis.width(), n_vis.height(), 0.0f), EnhancementKind::dynamic, l, r, th,
                     {n_nir.band.label}};
  for (std::size_t i = 0; i < out.C.size(); ++i)
    if (n_vis.mask[i] && n_nir.mask[i]) out.C[i] = contrast_weight(m_vis.m[i], m_nir.m[i], th);
  return out;
}

/// Per pixel the band with the highest modulation competes against the visible map.
inline MultibandEnhancement multiband_dynamic(const NormalMap& n_vis, std::span<const NormalMap> bands,
                                              const LightDirection& l, int r = 13, double th = 0.1) {
  if (bands.empty()) throw ParameterError("multiband_dynamic: need at least one band");
  for (const auto& b : bands) require_same_shape(n_vis.normals, b.normals, "multiband_dynamic");
  const int w = n_vis.width(), h = n_vis.height();
  const auto m_vis = michelson_contrast(lambertian_map(n_vis, l), r);
  std::vector<ContrastMap> m;
  std::vector<double> nm;
  MultibandEnhancement out{{GrayImage(w, h, 0.0f), EnhancementKind::dynamic, l, r, th, {}}, Image<int>(w, h, -1)};
  for (const auto& b : bands) {
    m.push_back(michelson_contrast(lambertian_map(b, l), r));
    nm.push_back(b.band.center_nm());
    out.map.bands.push_back(b.band.label);
  }
  std::vector<double> values(bands.size());
  std::vector<bool> usable(bands.size());
  for (std::size_t i = 0; i < out.map.C.size(); ++i) {
    for (std::size_t k = 0; k < bands.size(); ++k) {
      values[k] = m[k].m[i];
      usable[k] = bands[k].mask[i] != 0;
    }
    const int win = detail::pick_winner(values, nm, usable);
    out.winner[i] = win;
    if (win >= 0 && n_vis.mask[i])
      out.map.C[i] = contrast_weight(m_vis.m[i], values[static_cast<std::size_t>(win)], th);
  }
  return out;
}

} // namespace spectra::enhancement
