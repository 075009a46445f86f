#pragma once

#include <filesystem>
#include <string>

#include "spectra/synth/dataset.hpp"
#include "spectra/synth/render.hpp"
#include "spectra/synth/scene.hpp"

namespace spectra::synth {

struct LayeredSpherePreset {
  double radius_px = 48.0;
  int groove_rings = 3;
  double groove_half_width_px = 3.0;
  double groove_depth_px = 2.0;
  double paint_thickness_px = 2.0;
  RenderOptions render{};
};

/// Visible band sees the paint (tau 0); near-infrared band sees the grooves (tau 1).
inline std::vector<SynthBand> layered_sphere_bands() {
  return {{Band("vis", 400, 700, BandKind::visible_combined), 0.0}, {Band("nir850", 800, 900, BandKind::nir), 1.0}};
}

inline LayeredScene layered_sphere_scene(const LayeredSpherePreset& p = {}) {
  return gen_layered_sphere(
      p.radius_px, GrooveSpec::rings(p.groove_rings, p.radius_px, p.groove_half_width_px, p.groove_depth_px),
      p.paint_thickness_px);
}

/// Writes the layered-sphere dataset under dir and returns its manifest.
inline Manifest write_layered_sphere(const std::filesystem::path& dir, const LayeredSpherePreset& p = {}) {
  const auto scene = layered_sphere_scene(p);
  const auto bands = layered_sphere_bands();
  const auto stack = render_synthetic_stack(scene, light_rig_37(), bands, p.render);
  return write_dataset(dir, "layered-sphere", stack, scene, bands);
}

} // namespace spectra::synth
