#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spectra/core/types.hpp"
#include "spectra/photometric/normals.hpp"
#include "spectra/synth/scene.hpp"

namespace spectra::synth {

/// A rendered band and the fraction of radiance it takes from the lower layer.
struct SynthBand {
  Band band;
  double tau = 0.0;
};

struct RenderOptions {
  double albedo = 0.5;
  double noise_sigma = 0.0;
  /// Peak strength of a Phong lobe added to every band; 0 disables it.
  double specular_strength = 0.0;
  double shininess = 40.0;
  /// Exposure times in seconds; radiance scales by t / t[0] and clips at 1.
  std::vector<double> exposures{0.8, 1.0, 1.4};
  std::uint32_t seed = 7;
};

/// Phong highlight for a viewer at (0, 0, 1).
inline double phong(const Vec3& n, const LightDirection& l, double strength, double shininess) {
  const double nl = dot(n, l.vec());
  if (strength <= 0.0 || nl <= 0.0) return 0.0;
  const Vec3 r = 2.0 * nl * n - l.vec();
  return strength * std::pow(std::max(r.z, 0.0), shininess);
}

/// Forward renders each band: radiance = (1 - tau) * E(gt_top) + tau * E(gt_bottom), with
/// E the Lambertian term plus optional Phong lobe. Invalid scene pixels render as 0.
inline SpectralStack render_synthetic_stack(const LayeredScene& scene,
                                            const std::vector<LightDirection>& lights,
                                            const std::vector<SynthBand>& bands,
                                            const RenderOptions& opt = {}) {
  if (opt.exposures.empty() || !(opt.exposures.front() > 0.0))
    throw ParameterError("render_synthetic_stack: exposures must be positive");
  const int w = scene.width(), h = scene.height();
  SpectralStack stack(w, h);
  stack.lights = lights;
  const photometric::RadianceModel model(1.0, 1.0, opt.albedo);
  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, opt.noise_sigma > 0.0 ? opt.noise_sigma : 1.0);

  for (const auto& sb : bands) {
    if (sb.tau < 0.0 || sb.tau > 1.0) throw ParameterError("tau must lie in [0,1]");
    stack.bands.push_back(sb.band);
    stack.exposures[sb.band.label] = opt.exposures;
    for (std::size_t li = 0; li < lights.size(); ++li) {
      const LightDirection& l = lights[li];
      GrayImage base(w, h, 0.0f);
      for (std::size_t i = 0; i < base.size(); ++i) {
        if (!scene.gt_top.mask[i]) continue;
        const Vec3& nt = scene.gt_top.normals[i];
        const Vec3& nb = scene.gt_bottom.normals[i];
        const double et = photometric::forward_radiance(model, nt, l) +
                          phong(nt, l, opt.specular_strength, opt.shininess);
        const double eb = photometric::forward_radiance(model, nb, l) +
                          phong(nb, l, opt.specular_strength, opt.shininess);
        base[i] = static_cast<float>((1.0 - sb.tau) * et + sb.tau * eb);
      }
      for (std::size_t ev = 0; ev < opt.exposures.size(); ++ev) {
        const double gain = opt.exposures[ev] / opt.exposures.front();
        GrayImage img(w, h);
        for (std::size_t i = 0; i < img.size(); ++i) {
          double v = gain * base[i];
          if (opt.noise_sigma > 0.0) v += opt.noise_sigma * noise(rng);
          img[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        stack.add({sb.band.label, static_cast<int>(li), static_cast<int>(ev)}, {std::move(img), {}});
      }
    }
  }
  return stack;
}

} // namespace spectra::synth
