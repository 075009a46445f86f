#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "spectra/core/manifest.hpp"
#include "spectra/core/pfm.hpp"
#include "spectra/synth/render.hpp"
#include "spectra/synth/scene.hpp"

namespace spectra::synth {

/// Writes a manifest-rooted dataset: one PFM per capture under <band>/, ground-truth
/// normal maps, and an "extras" block naming them.
inline Manifest write_dataset(const std::filesystem::path& dir, const std::string& name,
                              const SpectralStack& stack, const LayeredScene& scene,
                              const std::vector<SynthBand>& bands) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.dataset = name;
  m.attribution = "synthetic";
  m.bands = stack.bands;
  m.lights = stack.lights;
  m.exposures = stack.exposures;
  m.root = dir;
  for (const auto& [key, cap] : stack.captures()) {
    char file[64];
    std::snprintf(file, sizeof file, "l%02d_ev%d.pfm", key.light, key.exposure);
    const std::string rel = key.band + "/" + file;
    std::filesystem::create_directories(dir / key.band);
    pfm::write(dir / rel, cap.radiance);
    m.files.push_back({key.band, key.light, key.exposure, rel});
  }
  pfm::write(dir / "gt_top.pfm", scene.gt_top);
  pfm::write(dir / "gt_bottom.pfm", scene.gt_bottom);
  m.extras["gt_top"] = "gt_top.pfm";
  m.extras["gt_bottom"] = "gt_bottom.pfm";
  m.extras["radius_px"] = scene.radius_px;
  for (const auto& b : bands) m.extras["tau"][b.band.label] = b.tau;
  write_manifest(dir / "manifest.json", m);
  return m;
}

} // namespace spectra::synth
