#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spectra/core/bilateral.hpp"
#include "spectra/core/color.hpp"
#include "spectra/core/error.hpp"
#include "spectra/core/filter.hpp"
#include "spectra/core/types.hpp"

namespace spectra::mlic {

enum class DetailWeighting {
  gradient, // Sobel gradient magnitude of the smoother level, low values dropped
  uniform,  // w = 1
};

struct MlicParams {
  double beta = 0.5;
  double y_th = 0.25;
  LightDirection l_input{0.0, 0.0, 1.0};
  /// Detail weights below this percentile (per spectrum) are set to zero.
  double noise_percentile = 0.10;
  double sigma_angle_deg = 30.0;
  int scales = 4;
  /// Spatial sigma of the first smoothing; doubles at every further level.
  double sigma_spatial = 1.0;
  /// Range sigma in log-luminance units.
  double sigma_range = 0.4;
  double log_epsilon = 1e-4;
  DetailWeighting weighting = DetailWeighting::gradient;
  /// Ignore bispectral luminance and run the visible-only pipeline.
  bool traditional = false;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("mlic: beta must be in (0, 1]");
    if (scales < 2) throw ParameterError("mlic: scales must be >= 2");
    if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0)) throw ParameterError("mlic: sigmas must be > 0");
    if (!(sigma_angle_deg > 0.0)) throw ParameterError("mlic: sigma_angle_deg must be > 0");
    if (!(noise_percentile >= 0.0 && noise_percentile < 1.0))
      throw ParameterError("mlic: noise_percentile must be in [0, 1)");
    if (!(log_epsilon > 0.0)) throw ParameterError("mlic: log_epsilon must be > 0");
  }
};

/// Co-registered per-light visible YUV images plus optional bispectral luminance.
struct MlicStack {
  std::vector<RgbImage> yuv;
  /// Empty, or one image per light.
  std::vector<GrayImage> y_bis;
  std::vector<LightDirection> lights;

  int width() const { return yuv.empty() ? 0 : yuv.front().width(); }
  int height() const { return yuv.empty() ? 0 : yuv.front().height(); }

  void validate() const {
    if (yuv.size() < 2) throw ParameterError("mlic: need at least two lights");
    if (lights.size() != yuv.size()) throw ParameterError("mlic: one light direction per image");
    if (!y_bis.empty() && y_bis.size() != yuv.size())
      throw ParameterError("mlic: bispectral luminance needs one image per light");
    for (const auto& img : yuv) require_same_shape(yuv.front(), img, "mlic yuv");
    for (const auto& img : y_bis) require_same_shape(yuv.front(), img, "mlic y_bis");
  }
};

enum class Spectrum { vis, bis };

/// Smoothed log-luminance levels per light; levels[i][0] is the input, later levels smoother.
struct Decomposition {
  Spectrum kind = Spectrum::vis;
  std::vector<std::vector<Image<double>>> levels;

  bool empty() const { return levels.empty(); }
  int scales() const { return levels.empty() ? 0 : static_cast<int>(levels.front().size()); }
};

inline Image<double> log_luminance(const GrayImage& y, double eps) {
  Image<double> out(y.width(), y.height());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::log(std::max<double>(y[i], 0.0) + eps);
  return out;
}

/// Level 0 is the input; level j is a bilateral smoothing of level j-1 with spatial sigma
/// sigma_spatial * 2^(j-1).
inline std::vector<Image<double>> decompose_levels(const Image<double>& base, int scales, double sigma_spatial,
                                                   double sigma_range) {
  if (scales < 2) throw ParameterError("decompose: scales must be >= 2");
  std::vector<Image<double>> out{base};
  for (int j = 1; j < scales; ++j)
    out.push_back(bilateral_filter(out.back(), sigma_spatial * std::pow(2.0, j - 1), sigma_range));
  return out;
}

inline std::vector<GrayImage> visible_luminance(const MlicStack& s) {
  std::vector<GrayImage> out;
  for (const auto& img : s.yuv) out.push_back(map_pixels(img, [](const Color3& c) { return c[0]; }));
  return out;
}

/// Decompositions of the visible and (when present) bispectral luminance.
inline std::pair<Decomposition, Decomposition> decompose(const MlicStack& s, const MlicParams& p) {
  s.validate();
  p.validate();
  Decomposition vis{Spectrum::vis, {}}, bis{Spectrum::bis, {}};
  for (const auto& y : visible_luminance(s))
    vis.levels.push_back(decompose_levels(log_luminance(y, p.log_epsilon), p.scales, p.sigma_spatial, p.sigma_range));
  if (!p.traditional)
    for (const auto& y : s.y_bis)
      bis.levels.push_back(decompose_levels(log_luminance(y, p.log_epsilon), p.scales, p.sigma_spatial, p.sigma_range));
  return {std::move(vis), std::move(bis)};
}

/// Per light, the pixels where the bispectral term replaces the visible one (Y_bis > Y_th).
inline std::vector<Mask> bispectral_selection(const MlicStack& s, const MlicParams& p) {
  std::vector<Mask> out;
  for (std::size_t i = 0; i < s.yuv.size(); ++i) {
    Mask m(s.width(), s.height(), 0);
    if (!p.traditional && !s.y_bis.empty())
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = s.y_bis[i][k] > p.y_th;
    out.push_back(std::move(m));
  }
  return out;
}

namespace detail {

inline Image<double> gradient_magnitude(const Image<double>& f) {
  const int w = f.width(), h = f.height();
  auto at = [&](int x, int y) { return f(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  Image<double> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 g = sobel_at(at, x, y);
      out(x, y) = std::hypot(g.x, g.y);
    }
  return out;
}

/// Nearest-rank percentile: the ceil(q n)-th smallest value (the smallest for q = 0).
inline double nearest_rank(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[rank == 0 ? 0 : rank - 1];
}

// weights[i][j] for j = 1..scales-1 (index j-1).
inline std::vector<std::vector<Image<double>>> detail_weights(const Decomposition& d, const MlicParams& p) {
  std::vector<std::vector<Image<double>>> w(d.levels.size());
  std::vector<double> all;
  for (std::size_t i = 0; i < d.levels.size(); ++i)
    for (std::size_t j = 1; j < d.levels[i].size(); ++j) {
      if (p.weighting == DetailWeighting::uniform) {
        w[i].push_back(Image<double>(d.levels[i][j].width(), d.levels[i][j].height(), 1.0));
        continue;
      }
      w[i].push_back(gradient_magnitude(d.levels[i][j]));
      all.insert(all.end(), w[i].back().begin(), w[i].back().end());
    }
  if (p.weighting == DetailWeighting::gradient && !all.empty()) {
    const double floor = nearest_rank(std::move(all), p.noise_percentile);
    for (auto& per_light : w)
      for (auto& img : per_light)
        for (double& v : img)
          if (v < floor) v = 0.0;
  }
  return w;
}

} // namespace detail

/// I_D = sum_i sum_j w o / sum_i sum_j w, with o the difference between consecutive levels
/// of the selected spectrum. Pixels whose weights sum to zero get 0.
inline Image<double> detail_term(const Decomposition& vis, const Decomposition& bis,
                                 const std::vector<Mask>& use_bis, const MlicParams& p) {
  if (vis.empty()) throw ParameterError("detail_term: empty decomposition");
  if (use_bis.size() != vis.levels.size()) throw ParameterError("detail_term: one selection mask per light");
  const bool have_bis = !bis.empty();
  if (have_bis && (bis.levels.size() != vis.levels.size() || bis.scales() != vis.scales()))
    throw ParameterError("detail_term: decompositions differ in shape");
  const auto wv = detail::detail_weights(vis, p);
  const auto wb = have_bis ? detail::detail_weights(bis, p) : decltype(wv){};
  const auto& ref = vis.levels.front().front();
  Image<double> out(ref.width(), ref.height(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0, N = 0.0;
    for (std::size_t i = 0; i < vis.levels.size(); ++i) {
      const bool b = have_bis && use_bis[i][k];
      const auto& G = b ? bis.levels[i] : vis.levels[i];
      const auto& W = b ? wb[i] : wv[i];
      for (std::size_t j = 1; j < G.size(); ++j) {
        const double w = W[j - 1][k];
        acc += w * (G[j - 1][k] - G[j][k]);
        N += w;
      }
    }
    out[k] = N > 0.0 ? acc / N : 0.0;
  }
  return out;
}

/// Gaussian falloff in the angle between l_input and each light, normalized to sum 1. When
/// every weight underflows the nearest light takes all the weight.
inline std::vector<double> light_weights(const std::vector<LightDirection>& lights, const LightDirection& l_input,
                                         double sigma_angle_deg) {
  if (lights.empty()) throw ParameterError("light_weights: no lights");
  if (!(sigma_angle_deg > 0.0)) throw ParameterError("light_weights: sigma must be > 0");
  std::vector<double> w;
  double sum = 0.0;
  std::size_t nearest = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < lights.size(); ++i) {
    const double a = angle_deg(lights[i].vec(), l_input.vec());
    if (a < best) best = a, nearest = i;
    w.push_back(std::exp(-a * a / (2.0 * sigma_angle_deg * sigma_angle_deg)));
    sum += w.back();
  }
  if (!(sum > 0.0)) {
    std::fill(w.begin(), w.end(), 0.0);
    w[nearest] = 1.0;
    return w;
  }
  for (double& v : w) v /= sum;
  return w;
}

/// I_B = sum_i w_B,i Gamma_i at the coarsest level, Gamma chosen per pixel as in the detail term.
inline Image<double> base_term(const Decomposition& vis, const Decomposition& bis, const std::vector<Mask>& use_bis,
                               const std::vector<double>& w_b) {
  if (vis.empty()) throw ParameterError("base_term: empty decomposition");
  if (w_b.size() != vis.levels.size() || use_bis.size() != vis.levels.size())
    throw ParameterError("base_term: one weight and mask per light");
  const bool have_bis = !bis.empty();
  const auto& ref = vis.levels.front().back();
  Image<double> out(ref.width(), ref.height(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w_b.size(); ++i) {
      const bool b = have_bis && use_bis[i][k];
      acc += w_b[i] * (b ? bis.levels[i].back()[k] : vis.levels[i].back()[k]);
    }
    out[k] = acc;
  }
  return out;
}

/// Y = exp(I_D + beta I_B).
inline Image<double> mlic_luminance(const Image<double>& I_D, const Image<double>& I_B, double beta) {
  require_same_shape(I_D, I_B, "mlic_luminance");
  Image<double> y(I_D.width(), I_D.height());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::exp(I_D[k] + beta * I_B[k]);
  return y;
}

/// Y from the detail and base terms, U and V as w_B-weighted sums, converted to RGB and clamped.
inline RgbImage mlic_render(const Image<double>& I_D, const Image<double>& I_B, const std::vector<GrayImage>& U,
                            const std::vector<GrayImage>& V, const std::vector<double>& w_b, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ParameterError("mlic: beta must be in (0, 1]");
  if (U.size() != w_b.size() || V.size() != w_b.size()) throw ParameterError("mlic_render: one U/V per light");
  const auto Y = mlic_luminance(I_D, I_B, beta);
  RgbImage out(Y.width(), Y.height());
  for (std::size_t k = 0; k < out.size(); ++k) {
    double u = 0.0, v = 0.0;
    for (std::size_t i = 0; i < w_b.size(); ++i) u += w_b[i] * U[i][k], v += w_b[i] * V[i][k];
    Color3 rgb = yuv_to_rgb(Color3{static_cast<float>(Y[k]), static_cast<float>(u), static_cast<float>(v)});
    for (float& c : rgb) c = std::clamp(c, 0.0f, 1.0f);
    out[k] = rgb;
  }
  return out;
}

struct MlicResult {
  RgbImage image;
  Image<double> Y, I_D, I_B;
  std::vector<double> light_weights;
};

inline MlicResult mlic(const MlicStack& s, const MlicParams& p) {
  const auto [vis, bis] = decompose(s, p);
  const auto sel = bispectral_selection(s, p);
  MlicResult r;
  r.light_weights = light_weights(s.lights, p.l_input, p.sigma_angle_deg);
  r.I_D = detail_term(vis, bis, sel, p);
  r.I_B = base_term(vis, bis, sel, r.light_weights);
  std::vector<GrayImage> U, V;
  for (const auto& img : s.yuv) {
    U.push_back(map_pixels(img, [](const Color3& c) { return c[1]; }));
    V.push_back(map_pixels(img, [](const Color3& c) { return c[2]; }));
  }
  r.Y = mlic_luminance(r.I_D, r.I_B, p.beta);
  r.image = mlic_render(r.I_D, r.I_B, U, V, r.light_weights, p.beta);
  return r;
}

/// Builds the stack from a dataset: color (or gray) of the first visible band per light, and
/// the radiance of the first bispectral-emission band when there is one.
inline MlicStack mlic_stack_from(const SpectralStack& s, int exposure = 0) {
  const Band* vis = nullptr;
  const Band* bis = nullptr;
  for (const auto& b : s.bands) {
    if (!vis && is_visible(b.kind)) vis = &b;
    if (!bis && b.kind == BandKind::bispectral_emission) bis = &b;
  }
  if (!vis) throw ParameterError("mlic: dataset has no visible band");
  MlicStack out;
  out.lights = s.lights;
  for (int i = 0; i < static_cast<int>(s.lights.size()); ++i) {
    const Capture& c = s.capture({vis->label, i, exposure});
    out.yuv.push_back(rgb_to_yuv(c.color ? *c.color : gray_to_rgb(c.radiance)));
    if (bis) out.y_bis.push_back(s.image(bis->label, i, exposure));
  }
  return out;
}

// ---- Multiple diffuse maps -----------------------------------------------------------------

struct DiffuseMap {
  RgbImage color;
  LightDirection light;
};

struct DiffuseResult {
  RgbImage image;
  std::vector<double> weights;
  std::optional<std::string> warning;
};

/// w_i = 1 - angle(l, l_i) / pi, renormalized; when all weights vanish the nearest map is used.
inline DiffuseResult diffuse_interpolate(const std::vector<DiffuseMap>& maps, const LightDirection& l) {
  if (maps.empty()) throw ParameterError("diffuse_interpolate: need at least one map");
  for (const auto& m : maps) require_same_shape(maps.front().color, m.color, "diffuse_interpolate");
  DiffuseResult r;
  double sum = 0.0;
  std::size_t nearest = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const double alpha = angle_deg(maps[i].light.vec(), l.vec()) / 180.0;
    r.weights.push_back(std::max(0.0, 1.0 - alpha));
    if (r.weights[i] > r.weights[nearest]) nearest = i;
    sum += r.weights[i];
  }
  if (!(sum > 0.0)) {
    r.warning = "all diffuse-map weights are zero; using the nearest map";
    std::fill(r.weights.begin(), r.weights.end(), 0.0);
    r.weights[nearest] = 1.0;
    sum = 1.0;
  }
  for (double& w : r.weights) w /= sum;
  r.image = RgbImage(maps.front().color.width(), maps.front().color.height());
  for (std::size_t k = 0; k < r.image.size(); ++k) {
    std::array<double, 3> acc{};
    for (std::size_t i = 0; i < maps.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) acc[c] += r.weights[i] * maps[i].color[k][c];
    r.image[k] = {static_cast<float>(acc[0]), static_cast<float>(acc[1]), static_cast<float>(acc[2])};
  }
  return r;
}

} // namespace spectra::mlic
