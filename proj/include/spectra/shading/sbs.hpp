#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/pyramid.hpp"
#include "spectra/core/types.hpp"
#include "spectra/enhancement/contrast.hpp"
#include "spectra/enhancement/curvature.hpp"

namespace spectra::shading {

enum class LightStrategy { enhancement_map, multilight, focus, static_principal };

/// How several near-infrared bands share one level.
enum class BandCombine {
  narrow, // per pixel the band with the strongest response
  broad,  // every band contributes C / band count
};

struct SbsParams {
  double a = 35.0;
  /// Negative pushes weight toward sharp levels, positive toward smooth ones.
  double f = 0.0;
  int r = 13;
  double th = 0.1;
  double th_curvature = 0.02;
  LightStrategy strategy = LightStrategy::enhancement_map;
  LightDirection l_global = LightDirection::normalize({-0.37, -0.47, 0.8});
  BandCombine combine = BandCombine::narrow;
  /// Run the light selection separately on every level instead of once for the stack.
  bool reselect_per_level = false;
  /// Clamp n . l at zero before weighting.
  bool clamp_dots = true;
  double principal_elevation_deg = 45.0;
  int focus_azimuths = 16;
  int focus_elevations = 8;
  std::optional<Mask> focus_region;
  /// NIR background blend used by the layered color renderer.
  double blend = 0.0;

  void validate() const {
    if (!(a > 0.0)) throw ParameterError("sbs: a must be > 0");
    if (!(f >= -1.0 && f <= 1.0)) throw ParameterError("sbs: f must be in [-1, 1]");
    if (r < 1) throw ParameterError("sbs: r must be >= 1");
    if (!(th >= 0.0) || !(th_curvature >= 0.0)) throw ParameterError("sbs: thresholds must be >= 0");
    if (!(blend >= 0.0 && blend <= 1.0)) throw ParameterError("sbs: blend must be in [0, 1]");
    if (focus_azimuths < 1 || focus_elevations < 1) throw ParameterError("sbs: focus grid must be non-empty");
    if (!(principal_elevation_deg > 0.0 && principal_elevation_deg <= 90.0))
      throw ParameterError("sbs: principal elevation must be in (0, 90]");
  }
};

/// Per-pixel light directions for one level. Entry 0 is the visible band, then one per
/// near-infrared band in pyramid order.
using LevelLights = std::vector<Image<Vec3>>;

/// Weights and lights feeding one pyramid level.
struct SbsLevelInput {
  /// One weight image per near-infrared band; their sum is the near-infrared share.
  std::vector<GrayImage> weights;
  LevelLights lights;
};

inline Image<Vec3> uniform_light(int w, int h, const LightDirection& l) { return Image<Vec3>(w, h, l.vec()); }

/// e = a ((1 - sum_k C_k) (n_vis . l_vis) + sum_k C_k (n_k . l_k)). Pixels outside the
/// visible mask stay 0; a band contributes only where its own mask is set.
inline Image<double> sbs_level(const NormalMap& n_vis, const Image<Vec3>& l_vis, std::span<const NormalMap> nir,
                               std::span<const GrayImage> weights, std::span<const Image<Vec3>> l_nir, double a,
                               bool clamp_dots = true) {
  if (nir.size() != weights.size() || nir.size() != l_nir.size())
    throw ParameterError("sbs_level: band, weight and light counts differ");
  require_same_shape(n_vis.normals, l_vis, "sbs_level light");
  for (std::size_t k = 0; k < nir.size(); ++k) {
    require_same_shape(n_vis.normals, nir[k].normals, "sbs_level band");
    require_same_shape(n_vis.normals, weights[k], "sbs_level weight");
    require_same_shape(n_vis.normals, l_nir[k], "sbs_level band light");
  }
  auto shade = [clamp_dots](const Vec3& n, const Vec3& l) {
    const double d = dot(n, l);
    return clamp_dots ? std::max(d, 0.0) : d;
  };
  Image<double> e(n_vis.width(), n_vis.height(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!n_vis.mask[i]) continue;
    double share = 0.0, acc = 0.0;
    for (std::size_t k = 0; k < nir.size(); ++k) {
      if (!nir[k].mask[i]) continue;
      const double c = weights[k][i];
      share += c;
      acc += c * shade(nir[k].normals[i], l_nir[k][i]);
    }
    e[i] = a * ((1.0 - share) * shade(n_vis.normals[i], l_vis[i]) + acc);
  }
  return e;
}

/// Two-band form with one light per spectrum.
inline Image<double> sbs_level(const NormalMap& n_vis, const NormalMap& n_nir, const GrayImage& C,
                               const LightDirection& l_vis, const LightDirection& l_nir, double a,
                               bool clamp_dots = true) {
  const int w = n_vis.width(), h = n_vis.height();
  const Image<Vec3> lv = uniform_light(w, h, l_vis);
  const Image<Vec3> ln[] = {uniform_light(w, h, l_nir)};
  const NormalMap bands[] = {n_nir};
  const GrayImage cs[] = {C};
  return sbs_level(n_vis, lv, bands, cs, ln, a, clamp_dots);
}

/// w_x proportional to base_x exp(f x), renormalized.
inline std::vector<double> frequency_weights(const std::vector<double>& base, double f) {
  std::vector<double> w(base.size());
  double sum = 0.0;
  for (std::size_t x = 0; x < base.size(); ++x) sum += w[x] = base[x] * std::exp(f * static_cast<double>(x));
  if (!(sum > 0.0)) throw ParameterError("frequency_weights: weights must have positive mass");
  for (double& v : w) v /= sum;
  return w;
}

/// Smoothstep of the value clamped to [0, 1].
inline double soft_toon(double v) {
  const double t = std::clamp(v, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// soft_toon(1/2 + 1/2 sum_x w_x e_x).
inline GrayImage sbs_compose(const std::vector<Image<double>>& e, const std::vector<double>& weights) {
  if (e.empty() || e.size() != weights.size()) throw ParameterError("sbs_compose: need one weight per level");
  GrayImage out(e.front().width(), e.front().height(), 0.0f);
  for (const auto& lvl : e) require_same_shape(lvl, out, "sbs_compose");
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t x = 0; x < e.size(); ++x) s += weights[x] * e[x][i];
    out[i] = static_cast<float>(soft_toon(0.5 + 0.5 * s));
  }
  return out;
}

/// Renders the pyramid (band 0 visible, the rest near-infrared) with prepared per-level inputs.
inline GrayImage sbs_render(const SmoothedPyramid& pyr, const std::vector<SbsLevelInput>& inputs,
                            const SbsParams& p) {
  p.validate();
  if (pyr.size() < 1) throw ParameterError("sbs_render: empty pyramid");
  if (inputs.size() != static_cast<std::size_t>(pyr.size()))
    throw ParameterError("sbs_render: need one input per level");
  std::vector<Image<double>> e;
  for (int x = 0; x < pyr.size(); ++x) {
    const auto& bands = pyr.levels[static_cast<std::size_t>(x)].normals;
    const auto& in = inputs[static_cast<std::size_t>(x)];
    if (bands.empty() || in.lights.size() != bands.size())
      throw ParameterError("sbs_render: need one light image per band");
    const std::span<const NormalMap> nir(bands.data() + 1, bands.size() - 1);
    const std::span<const Image<Vec3>> l_nir(in.lights.data() + 1, in.lights.size() - 1);
    e.push_back(sbs_level(bands.front(), in.lights.front(), nir, in.weights, l_nir, p.a, p.clamp_dots));
  }
  return sbs_compose(e, frequency_weights(pyr.weights, p.f));
}

// ---- Light strategies ----------------------------------------------------------------------

/// Azimuth-major hemisphere grid; elevations sit at cell centers in (0, 90) degrees.
inline std::vector<LightDirection> focus_grid(int azimuths, int elevations) {
  std::vector<LightDirection> out;
  for (int j = 0; j < azimuths; ++j)
    for (int i = 0; i < elevations; ++i)
      out.push_back(LightDirection::from_angles(2.0 * kPi * j / azimuths, (i + 0.5) * 0.5 * kPi / elevations));
  return out;
}

/// chi for a candidate light at a level, together with the mask of usable pixels.
using ChiFunction = std::function<enhancement::LambertianMap(const LightDirection&, int level)>;

struct FocusResult {
  LightDirection light;
  double score = 0.0;
  /// Score of every candidate, in grid order.
  std::vector<double> scores;
};

/// Mean Michelson contrast of chi inside the region, averaged over the given levels; the
/// first candidate with the highest score wins.
inline FocusResult focus_search(const ChiFunction& chi, const std::vector<int>& levels, const Mask& region, int r,
                                const std::vector<LightDirection>& candidates) {
  if (candidates.empty() || levels.empty()) throw ParameterError("focus_search: nothing to search");
  FocusResult best;
  best.score = -1.0;
  for (const auto& l : candidates) {
    double total = 0.0;
    for (int x : levels) {
      const auto c = chi(l, x);
      require_same_shape(c.chi, region, "focus_search region");
      const auto m = enhancement::michelson_contrast(c, r);
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i] && c.mask[i]) s += m.m[i], ++n;
      if (n == 0) throw ParameterError("focus_search: focus region has no valid pixels");
      total += s / static_cast<double>(n);
    }
    const double score = total / static_cast<double>(levels.size());
    best.scores.push_back(score);
    if (score > best.score) {
      best.score = score;
      best.light = l;
    }
  }
  return best;
}

namespace detail {

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0; }
};

inline Box bounding_box(const Mask& m) {
  Box b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) b = {std::min(b.x0, x), std::min(b.y0, y), std::max(b.x1, x), std::max(b.y1, y)};
  return b;
}

template <class T>
Image<T> crop(const Image<T>& in, const Box& b) {
  Image<T> out(b.x1 - b.x0 + 1, b.y1 - b.y0 + 1);
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) out(x - b.x0, y - b.y0) = in(x, y);
  return out;
}

inline NormalMap crop(const NormalMap& n, const Box& b) {
  NormalMap out;
  out.normals = crop(n.normals, b);
  out.mask = crop(n.mask, b);
  out.band = n.band;
  return out;
}

} // namespace detail

/// Focus light for the near-infrared bands of a pyramid. Contrast is averaged over bands
/// and over the given levels (all levels when empty). Only the region plus an r-pixel
/// margin is evaluated.
inline FocusResult focus_light(const SmoothedPyramid& pyr, const Mask& region, const SbsParams& p,
                               std::vector<int> levels = {}) {
  if (pyr.size() < 1 || pyr.levels.front().normals.size() < 2)
    throw ParameterError("focus_light: need a visible and at least one near-infrared band");
  const auto& ref = pyr.levels.front().normals.front();
  require_same_shape(ref.mask, region, "focus_light region");
  detail::Box box = detail::bounding_box(region);
  if (box.empty()) throw ParameterError("focus_light: empty focus region");
  if (levels.empty())
    for (int x = 0; x < pyr.size(); ++x) levels.push_back(x);
  box = {std::max(0, box.x0 - p.r), std::max(0, box.y0 - p.r), std::min(ref.width() - 1, box.x1 + p.r),
         std::min(ref.height() - 1, box.y1 + p.r)};
  std::vector<std::vector<NormalMap>> cropped(static_cast<std::size_t>(pyr.size()));
  for (int x : levels) {
    if (x < 0 || x >= pyr.size()) throw ParameterError("focus_light: level out of range");
    const auto& bands = pyr.levels[static_cast<std::size_t>(x)].normals;
    for (std::size_t k = 1; k < bands.size(); ++k) cropped[static_cast<std::size_t>(x)].push_back(detail::crop(bands[k], box));
  }
  const Mask sub = detail::crop(region, box);
  // Every (level, band) pair is scored as its own pseudo-level.
  std::vector<int> pseudo;
  std::vector<std::pair<int, std::size_t>> lookup;
  for (int x : levels)
    for (std::size_t k = 0; k < cropped[static_cast<std::size_t>(x)].size(); ++k) {
      pseudo.push_back(static_cast<int>(lookup.size()));
      lookup.emplace_back(x, k);
    }
  const ChiFunction chi = [&](const LightDirection& l, int idx) {
    const auto [x, k] = lookup[static_cast<std::size_t>(idx)];
    return enhancement::lambertian_map(cropped[static_cast<std::size_t>(x)][k], l);
  };
  return focus_search(chi, pseudo, sub, p.r, focus_grid(p.focus_azimuths, p.focus_elevations));
}

/// Global light projected into the tangent plane of each normal and renormalized. Invalid
/// pixels and degenerate projections keep the global light.
inline Image<Vec3> tangent_lights(const NormalMap& n, const LightDirection& l_global) {
  const Vec3 g = l_global.vec();
  Image<Vec3> out(n.width(), n.height(), g);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!n.mask[i]) continue;
    const Vec3 t = g - n.normals[i] * dot(g, n.normals[i]);
    if (norm(t) > 1e-9) out[i] = normalized(t);
  }
  return out;
}

/// Lights along the k1 principal direction lifted to the given elevation. The sign of the
/// direction is chosen to face the global light's azimuth.
inline Image<Vec3> principal_lights(const enhancement::CurvatureMaps& k, const LightDirection& l_global,
                                    double elevation_deg) {
  const Vec3 g = l_global.vec();
  const double e = elevation_deg * kPi / 180.0;
  Image<Vec3> out(k.width(), k.height(), g);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!k.mask[i]) continue;
    Vec2 d = k.dir1[i];
    const double s = d.x * g.x + d.y * g.y;
    if (s < 0.0 || (s == 0.0 && (d.y > 0.0 || (d.y == 0.0 && d.x > 0.0)))) d = {-d.x, -d.y};
    out[i] = normalized({std::cos(e) * d.x, std::cos(e) * d.y, std::sin(e)});
  }
  return out;
}

/// Lights for every band at one level. c_light is the light that generated C (enhancement
/// map and focus strategies); curvature is needed only for static-principal lights.
inline LevelLights light_strategy(LightStrategy kind, const SmoothedPyramid& pyr, int level,
                                  const LightDirection& c_light, const SbsParams& p,
                                  const std::vector<enhancement::CurvatureMaps>* curvature = nullptr) {
  const auto& bands = pyr.levels.at(static_cast<std::size_t>(level)).normals;
  const int w = bands.front().width(), h = bands.front().height();
  LevelLights out;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    switch (kind) {
    case LightStrategy::enhancement_map:
    case LightStrategy::focus:
      out.push_back(uniform_light(w, h, c_light));
      break;
    case LightStrategy::multilight:
      if (level + 1 < pyr.size())
        out.push_back(tangent_lights(pyr.levels[static_cast<std::size_t>(level) + 1].normals[k], p.l_global));
      else
        out.push_back(uniform_light(w, h, p.l_global));
      break;
    case LightStrategy::static_principal:
      if (!curvature || curvature->size() != bands.size())
        throw ParameterError("light_strategy: static-principal needs curvature for every band");
      out.push_back(principal_lights((*curvature)[k], p.l_global, p.principal_elevation_deg));
      break;
    }
  }
  return out;
}

// ---- Full pipeline -------------------------------------------------------------------------

struct SbsResult {
  GrayImage shade;
  std::vector<SbsLevelInput> levels;
  /// Near-infrared share per level, summed over bands.
  std::vector<GrayImage> C;
  /// Light used to build C at each level (dynamic strategies only).
  std::vector<LightDirection> c_lights;
};

namespace detail {

inline std::vector<GrayImage> split_by_winner(const enhancement::MultibandEnhancement& m, std::size_t bands) {
  std::vector<GrayImage> out(bands, GrayImage(m.map.C.width(), m.map.C.height(), 0.0f));
  for (std::size_t i = 0; i < m.map.C.size(); ++i)
    if (m.winner[i] >= 0) out[static_cast<std::size_t>(m.winner[i])][i] = m.map.C[i];
  return out;
}

} // namespace detail

/// Spectral band shading of a pyramid whose band 0 is visible and the rest near-infrared.
inline SbsResult spectral_band_shading(const SmoothedPyramid& pyr, const SbsParams& p) {
  p.validate();
  if (pyr.size() < 1 || pyr.levels.front().normals.size() < 2)
    throw ParameterError("spectral_band_shading: need a visible and at least one near-infrared band");
  const std::size_t q = pyr.levels.front().normals.size() - 1;
  const Mask& full = pyr.levels.front().normals.front().mask;

  std::optional<LightDirection> stack_light;
  if (p.strategy == LightStrategy::focus && !p.reselect_per_level)
    stack_light = focus_light(pyr, p.focus_region ? *p.focus_region : full, p).light;

  SbsResult res;
  for (int x = 0; x < pyr.size(); ++x) {
    const auto& bands = pyr.levels[static_cast<std::size_t>(x)].normals;
    const NormalMap& vis = bands.front();
    const std::span<const NormalMap> nir(bands.data() + 1, q);
    SbsLevelInput in;
    LightDirection cl = p.l_global;
    std::vector<enhancement::CurvatureMaps> curv;

    if (p.strategy == LightStrategy::static_principal) {
      for (const auto& b : bands) curv.push_back(enhancement::curvature_maps(b));
      const std::span<const enhancement::CurvatureMaps> kn(curv.data() + 1, q);
      if (p.combine == BandCombine::narrow) {
        in.weights = detail::split_by_winner(enhancement::multiband_static(curv.front(), kn, p.th_curvature), q);
      } else {
        for (const auto& k : kn) {
          auto c = enhancement::static_enhancement(curv.front(), k, p.th_curvature).C;
          for (float& v : c) v /= static_cast<float>(q);
          in.weights.push_back(std::move(c));
        }
      }
    } else {
      if (stack_light) {
        cl = *stack_light;
      } else if (p.reselect_per_level &&
                 (p.strategy == LightStrategy::focus || p.strategy == LightStrategy::enhancement_map)) {
        const Mask& region = p.strategy == LightStrategy::focus && p.focus_region ? *p.focus_region : full;
        cl = focus_light(pyr, region, p, {x}).light;
      }
      if (p.combine == BandCombine::narrow) {
        in.weights = detail::split_by_winner(enhancement::multiband_dynamic(vis, nir, cl, p.r, p.th), q);
      } else {
        for (const auto& b : nir) {
          auto c = enhancement::dynamic_enhancement(vis, b, cl, p.r, p.th).C;
          for (float& v : c) v /= static_cast<float>(q);
          in.weights.push_back(std::move(c));
        }
      }
      res.c_lights.push_back(cl);
    }
    in.lights = light_strategy(p.strategy, pyr, x, cl, p, curv.empty() ? nullptr : &curv);

    GrayImage total(vis.width(), vis.height(), 0.0f);
    for (const auto& wgt : in.weights)
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += wgt[i];
    res.C.push_back(std::move(total));
    res.levels.push_back(std::move(in));
  }
  res.shade = sbs_render(pyr, res.levels, p);
  return res;
}

// ---- Layered color -------------------------------------------------------------------------

/// Background = ((1 - blend) visible color + blend NIR intensity) scaled by 2 * shade, so
/// mid-gray shading leaves the color unchanged. Each band's palette color is then composited
/// over it in band order with that band's C as alpha.
inline RgbImage layered_color_render(const GrayImage& shade, const RgbImage& vis_color, const GrayImage& nir,
                                     std::span<const GrayImage> C, std::span<const Color3> palette,
                                     double blend) {
  if (C.size() != palette.size()) throw ParameterError("layered_color_render: palette size must match band count");
  if (!(blend >= 0.0 && blend <= 1.0)) throw ParameterError("layered_color_render: blend must be in [0, 1]");
  require_same_shape(shade, vis_color, "layered_color_render color");
  if (blend > 0.0) require_same_shape(shade, nir, "layered_color_render nir");
  for (const auto& c : C) require_same_shape(shade, c, "layered_color_render C");
  RgbImage out(shade.width(), shade.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Color3 px;
    for (int ch = 0; ch < 3; ++ch) {
      const double base = (1.0 - blend) * vis_color[i][static_cast<std::size_t>(ch)] + (blend > 0.0 ? blend * nir[i] : 0.0);
      px[static_cast<std::size_t>(ch)] = static_cast<float>(std::clamp(base * 2.0 * shade[i], 0.0, 1.0));
    }
    for (std::size_t k = 0; k < C.size(); ++k) {
      const float alpha = std::clamp(C[k][i], 0.0f, 1.0f);
      for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1.0f - alpha) * px[ch] + alpha * palette[k][ch];
    }
    out[i] = px;
  }
  return out;
}

} // namespace spectra::shading
