#pragma once

#include <string>
#include <variant>
#include <vector>

#include "spectra/core/pfm.hpp"
#include "spectra/core/png.hpp"
#include "spectra/core/pyramid.hpp"
#include "spectra/enhancement/contrast.hpp"
#include "spectra/enhancement/curvature.hpp"
#include "spectra/mlic/mlic.hpp"
#include "spectra/photometric/normals.hpp"
#include "spectra/service/registry.hpp"
#include "spectra/service/request.hpp"
#include "spectra/shading/curvature_shade.hpp"
#include "spectra/shading/lines.hpp"
#include "spectra/shading/sbs.hpp"
#include "spectra/shading/toon.hpp"

namespace spectra::service {

using RenderedImage = std::variant<GrayImage, RgbImage>;

struct RenderOutput {
  std::string bytes;
  std::string content_type;
};

/// Palette for layered color, cycled when there are more bands.
inline const std::vector<Color3>& band_palette() {
  static const std::vector<Color3> p{{0.85f, 0.25f, 0.2f}, {0.2f, 0.45f, 0.85f}, {0.25f, 0.7f, 0.3f},
                                     {0.8f, 0.6f, 0.15f}};
  return p;
}

/// Loads and derives dataset products through the registry cache.
class DatasetView {
public:
  DatasetView(DatasetRegistry& reg, std::string id) : reg_(reg), id_(std::move(id)) { reg_.manifest_path(id_); }

  std::shared_ptr<const SpectralStack> stack() {
    return reg_.cached<SpectralStack>(id_, "stack", [&] {
      auto s = load_dataset(reg_.manifest_path(id_));
      s.validate();
      return s;
    });
  }

  std::string visible_band() {
    const auto s = stack();
    for (const auto& b : s->bands)
      if (b.kind == BandKind::visible_combined) return b.label;
    for (const auto& b : s->bands)
      if (is_visible(b.kind)) return b.label;
    throw ParameterError("dataset '" + id_ + "' has no visible band");
  }

  std::vector<std::string> nir_bands(const std::vector<std::string>& requested) {
    const auto s = stack();
    std::vector<std::string> out;
    if (!requested.empty()) {
      for (const auto& label : requested) {
        bool found = false;
        for (const auto& b : s->bands) found = found || b.label == label;
        if (!found) throw ValidationError("nir", "unknown band '" + label + "'");
      }
      return requested;
    }
    for (const auto& b : s->bands)
      if (b.kind == BandKind::nir) out.push_back(b.label);
    if (out.empty()) throw ParameterError("dataset '" + id_ + "' has no near-infrared band");
    return out;
  }

  std::shared_ptr<const NormalMap> normals(const std::string& band) {
    const auto s = stack();
    s->band(band);
    return reg_.cached<NormalMap>(id_, "normals:" + band, [&] { return photometric::solve_normals(*s, band); });
  }

  /// Mean EV0 color over all lights of a band; gray bands are replicated.
  std::shared_ptr<const RgbImage> mean_color(const std::string& band) {
    return reg_.cached<RgbImage>(id_, "color:" + band, [&] {
      const auto s = stack();
      const auto lights = s->lights_for(band);
      std::vector<double> acc(static_cast<std::size_t>(s->width()) * s->height() * 3, 0.0);
      for (int l : lights) {
        const Capture& c = s->capture({band, l, 0});
        for (std::size_t i = 0; i < c.radiance.size(); ++i)
          for (std::size_t ch = 0; ch < 3; ++ch) acc[i * 3 + ch] += c.color ? (*c.color)[i][ch] : c.radiance[i];
      }
      RgbImage out(s->width(), s->height());
      const double n = lights.empty() ? 1.0 : static_cast<double>(lights.size());
      for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t ch = 0; ch < 3; ++ch) out[i][ch] = static_cast<float>(acc[i * 3 + ch] / n);
      return out;
    });
  }

  std::shared_ptr<const GrayImage> mean_radiance(const std::string& band) {
    return reg_.cached<GrayImage>(id_, "radiance:" + band, [&] {
      const auto s = stack();
      const auto lights = s->lights_for(band);
      std::vector<double> acc(static_cast<std::size_t>(s->width()) * s->height(), 0.0);
      for (int l : lights) {
        const auto& img = s->image(band, l, 0);
        for (std::size_t i = 0; i < img.size(); ++i) acc[i] += img[i];
      }
      GrayImage out(s->width(), s->height());
      const double n = lights.empty() ? 1.0 : static_cast<double>(lights.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(acc[i] / n);
      return out;
    });
  }

  /// Pyramid over the visible band followed by the given near-infrared bands.
  std::shared_ptr<const SmoothedPyramid> pyramid(const std::vector<std::string>& nir, const PyramidParams& p) {
    const std::string vis = visible_band();
    std::string key = "pyramid:" + std::to_string(p.levels) + ":" + std::to_string(p.base_width_px) + ":" + vis;
    for (const auto& b : nir) key += "," + b;
    return reg_.cached<SmoothedPyramid>(id_, key, [&] {
      std::vector<NormalMap> bands{*normals(vis)};
      for (const auto& b : nir) bands.push_back(*normals(b));
      return build_pyramid(bands, *mean_color(vis), p);
    });
  }

private:
  DatasetRegistry& reg_;
  std::string id_;
};

namespace detail {

inline GrayImage lines_image(const Mask& marks) {
  GrayImage out(marks.width(), marks.height(), 1.0f);
  for (std::size_t i = 0; i < marks.size(); ++i)
    if (marks[i]) out[i] = 0.0f;
  return out;
}

inline Mask region_mask(int w, int h, const std::array<int, 4>& r) {
  Mask m(w, h, 0);
  for (int y = std::max(r[1], 0); y < std::min(r[3], h); ++y)
    for (int x = std::max(r[0], 0); x < std::min(r[2], w); ++x) m(x, y) = 1;
  return m;
}

inline RenderedImage render_sbs(DatasetView& ds, const RenderParams& rp) {
  const auto nir = ds.nir_bands(rp.nir);
  const auto pyr = ds.pyramid(nir, rp.pyramid);
  shading::SbsParams p = rp.sbs;
  const auto& base = pyr->levels.front().normals.front();
  if (rp.focus_region) p.focus_region = region_mask(base.width(), base.height(), *rp.focus_region);
  const auto res = shading::spectral_band_shading(*pyr, p);
  if (!rp.layered_color) return res.shade;
  std::vector<Color3> palette;
  for (std::size_t k = 0; k < nir.size(); ++k) palette.push_back(band_palette()[k % band_palette().size()]);
  std::vector<GrayImage> C(nir.size(), GrayImage(base.width(), base.height(), 0.0f));
  for (const auto& lvl : res.levels)
    for (std::size_t k = 0; k < nir.size(); ++k)
      for (std::size_t i = 0; i < C[k].size(); ++i)
        C[k][i] += lvl.weights[k][i] / static_cast<float>(res.levels.size());
  const GrayImage nir_img = p.blend > 0.0 ? *ds.mean_radiance(nir.front()) : GrayImage();
  return shading::layered_color_render(res.shade, *ds.mean_color(ds.visible_band()), nir_img, C, palette, p.blend);
}

inline RenderedImage render_curvature(DatasetView& ds, const RenderParams& rp) {
  const auto nir = ds.nir_bands(rp.nir);
  const auto pyr = ds.pyramid({nir.front()}, rp.pyramid);
  std::vector<enhancement::CurvatureMaps> kv, kn;
  std::vector<GrayImage> C;
  for (const auto& lvl : pyr->levels) {
    kv.push_back(enhancement::curvature_maps(lvl.normals[0]));
    kn.push_back(enhancement::curvature_maps(lvl.normals[1]));
    C.push_back(enhancement::static_enhancement(kv.back(), kn.back(), rp.th_curvature, rp.curvature.measure).C);
  }
  return shading::curvature_shade(kv, kn, C, rp.curvature);
}

inline RenderedImage render_lines(DatasetView& ds, const RenderParams& rp) {
  const auto n = ds.normals(rp.band.empty() ? ds.visible_band() : rp.band);
  switch (rp.line_kind) {
    case LineKind::suggestive: return lines_image(shading::suggestive_contours(*n, rp.lines));
    case LineKind::discontinuity: return lines_image(shading::discontinuity_lines(*n, rp.lines));
    case LineKind::principal:
      return lines_image(shading::principal_curvature_lines(enhancement::curvature_maps(*n), rp.lines));
  }
  throw ParameterError("unknown line kind");
}

inline RenderedImage render_toon(DatasetView& ds, const RenderParams& rp) {
  const std::string vis = ds.visible_band();
  const auto nir = ds.nir_bands(rp.nir);
  return shading::nir_blend_toon(*ds.mean_color(vis), *ds.normals(vis), *ds.mean_radiance(nir.front()), rp.toon).image;
}

inline RenderedImage render_mlic(DatasetView& ds, const RenderParams& rp) {
  const auto s = ds.stack();
  return mlic::mlic(mlic::mlic_stack_from(*s), rp.mlic).image;
}

inline RenderedImage render_lambertian(DatasetView& ds, const RenderParams& rp) {
  const auto n = ds.normals(rp.band.empty() ? ds.visible_band() : rp.band);
  return enhancement::lambertian_map(*n, rp.light).chi;
}

} // namespace detail

inline RenderedImage render_image(DatasetRegistry& reg, const RenderRequest& req) {
  DatasetView ds(reg, req.dataset);
  switch (req.mode) {
    case RenderMode::sbs: return detail::render_sbs(ds, req.params);
    case RenderMode::curvature: return detail::render_curvature(ds, req.params);
    case RenderMode::lines: return detail::render_lines(ds, req.params);
    case RenderMode::toon: return detail::render_toon(ds, req.params);
    case RenderMode::mlic: return detail::render_mlic(ds, req.params);
    case RenderMode::lambertian: return detail::render_lambertian(ds, req.params);
  }
  throw ParameterError("unknown mode");
}

/// 8-bit PNG without ancillary chunks, or a float PFM.
inline std::string encode_image(const RenderedImage& img, OutputFormat format) {
  return std::visit(
      [&](const auto& im) -> std::string {
        if (format == OutputFormat::png) return png::encode(im);
        using T = std::decay_t<decltype(im)>;
        pfm::Raw raw{im.width(), im.height(), std::is_same_v<T, RgbImage> ? 3 : 1, {}};
        for (const auto& px : im) {
          if constexpr (std::is_same_v<T, RgbImage>)
            raw.data.insert(raw.data.end(), px.begin(), px.end());
          else
            raw.data.push_back(px);
        }
        return pfm::encode(raw);
      },
      img);
}

inline RenderOutput render(DatasetRegistry& reg, const RenderRequest& req) {
  return {encode_image(render_image(reg, req), req.format),
          req.format == OutputFormat::png ? "image/png" : "image/x-portable-floatmap"};
}

} // namespace spectra::service
