#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "spectra/core/types.hpp"
#include "spectra/photometric/coherence.hpp"
#include "spectra/photometric/normals.hpp"
#include "spectra/photometric/specular.hpp"

namespace spectra::photometric {

struct HighlightParams {
  double th_ev = 0.13;
  WelchParams welch;
  /// Suspicion level above which a pixel is masked, before dilation.
  double suspicion_threshold = 0.05;
  int dilate_px = 4;
  int sf_iterations = 1;
  /// Log excess over the re-rendered estimate that counts as specular.
  double min_excess = 0.05;
  /// Re-render / specular_free / re-solve rounds after the masked first pass.
  int rounds = 10;
  bool use_coherence = true;
  bool use_specular_free = true;
  SolveParams solve;
};

struct HighlightResult {
  NormalMap normals;
  HighlightMask mask;
  std::vector<CoherenceReport> reports;
};

inline Mask dilate(const Mask& m, int r) {
  if (r <= 0) return m;
  Mask out(m.width(), m.height(), 0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
    }
  return out;
}

/// Thresholded, dilated coherence suspicion for every light of a band.
inline HighlightMask detect_highlights(const SpectralStack& stack, const std::string& band,
                                       const HighlightParams& p,
                                       std::vector<CoherenceReport>* reports = nullptr) {
  HighlightMask hm;
  hm.band = band;
  for (int l : stack.lights_for(band)) {
    const int n_ev = stack.exposure_count(band, l);
    if (n_ev < 2) {
      hm.per_light.emplace_back();
      continue;
    }
    std::vector<GrayImage> evs;
    for (int e = 0; e < n_ev; ++e) evs.push_back(stack.image(band, l, e));
    CoherenceReport rep = coherence_mask(evs, p.th_ev, p.welch);
    Mask m(stack.width(), stack.height(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rep.suspicion[i] > p.suspicion_threshold;
    hm.per_light.push_back(dilate(m, p.dilate_px));
    if (reports) reports->push_back(std::move(rep));
  }
  return hm;
}

/// albedo * max(n . l, 0) from a solved map; pixels it cannot predict keep `fallback`.
inline GrayImage rerender(const NormalMap& n, const LightDirection& l, const GrayImage& fallback) {
  GrayImage out = fallback;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (n.mask[i]) out[i] = static_cast<float>((*n.albedo)[i] * std::max(dot(n.normals[i], l.vec()), 0.0));
  return out;
}

/// Highlight-robust normals for one band: coherence masking of the EV0 solve, then rounds
/// of specular_free against a re-rendered highlight-free estimate s_o.
inline HighlightResult remove_highlights(const SpectralStack& stack, const std::string& band,
                                         const HighlightParams& p = {}) {
  HighlightResult res;
  std::vector<GrayImage> images;
  std::vector<LightDirection> lights;
  for (int l : stack.lights_for(band)) {
    images.push_back(stack.image(band, l, 0));
    lights.push_back(stack.lights.at(static_cast<std::size_t>(l)));
  }
  if (p.use_coherence) res.mask = detect_highlights(stack, band, p, &res.reports);
  const HighlightMask* hm = p.use_coherence ? &res.mask : nullptr;
  res.normals = solve_normals(images, lights, hm, p.solve);
  if (p.use_specular_free) {
    for (int round = 0; round < p.rounds; ++round) {
      std::vector<GrayImage> cleaned;
      for (std::size_t i = 0; i < images.size(); ++i)
        cleaned.push_back(specular_free(rerender(res.normals, lights[i], images[i]), images[i],
                                        p.sf_iterations, p.min_excess));
      res.normals = solve_normals(cleaned, lights, hm, p.solve);
    }
  }
  res.normals.band = stack.band(band);
  return res;
}

} // namespace spectra::photometric
