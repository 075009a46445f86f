#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectra/core/color.hpp"
#include "spectra/core/error.hpp"
#include "spectra/core/pfm.hpp"
#include "spectra/core/png.hpp"
#include "spectra/core/types.hpp"

namespace spectra {

/// One image reference: which (band, light, exposure) it holds and where it lives.
struct FileEntry {
  std::string band;
  int light = 0;
  int ev = 0;
  std::string path;
  bool operator==(const FileEntry&) const = default;
};

/// Dataset description. Paths are relative to the manifest's directory.
///
/// JSON layout:
///   { "dataset": "...", "attribution": "...",
///     "bands": [{"label": "vis", "kind": "visible-combined", "wavelength_nm": [400, 700]}],
///     "lights": [[x, y, z], ...],
///     "exposures": {"vis": [0.2, 0.5, 0.7]},
///     "files": [{"band": "vis", "light": 0, "ev": 0, "path": "vis/l00_ev0.png"}],
///     "extras": { ... } }
/// "extras" is free-form and carried through unchanged (the synthetic generator stores
/// ground truth references there).
struct Manifest {
  std::string dataset;
  std::string attribution;
  std::vector<Band> bands;
  std::vector<LightDirection> lights;
  std::map<std::string, std::vector<double>> exposures;
  std::vector<FileEntry> files;
  nlohmann::json extras = nlohmann::json::object();
  std::filesystem::path root;

  bool operator==(const Manifest& o) const {
    return dataset == o.dataset && attribution == o.attribution && bands == o.bands &&
           lights == o.lights && exposures == o.exposures && files == o.files &&
           extras == o.extras;
  }
};

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["dataset"] = m.dataset;
  j["attribution"] = m.attribution;
  j["bands"] = nlohmann::json::array();
  for (const auto& b : m.bands) {
    nlohmann::json bj{{"label", b.label}, {"kind", to_string(b.kind)}};
    if (b.low_nm == b.high_nm) bj["wavelength_nm"] = b.low_nm;
    else bj["wavelength_nm"] = {b.low_nm, b.high_nm};
    j["bands"].push_back(bj);
  }
  j["lights"] = nlohmann::json::array();
  for (const auto& l : m.lights) j["lights"].push_back({l.x(), l.y(), l.z()});
  j["exposures"] = m.exposures;
  j["files"] = nlohmann::json::array();
  for (const auto& f : m.files)
    j["files"].push_back({{"band", f.band}, {"light", f.light}, {"ev", f.ev}, {"path", f.path}});
  if (!m.extras.empty()) j["extras"] = m.extras;
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.dataset = j.at("dataset").get<std::string>();
    m.attribution = j.value("attribution", std::string{});
    for (const auto& bj : j.at("bands")) {
      const auto& wl = bj.at("wavelength_nm");
      double lo, hi;
      if (wl.is_array()) {
        lo = wl.at(0).get<double>();
        hi = wl.at(1).get<double>();
      } else {
        lo = hi = wl.get<double>();
      }
      m.bands.emplace_back(bj.at("label").get<std::string>(), lo, hi,
                           band_kind_from_string(bj.at("kind").get<std::string>()));
    }
    for (const auto& lj : j.at("lights")) {
      const Vec3 v{lj.at(0).get<double>(), lj.at(1).get<double>(), lj.at(2).get<double>()};
      if (std::abs(norm(v) - 1.0) > 1e-6)
        throw LoadError("manifest: light " + std::to_string(m.lights.size()) +
                        " is not a unit vector");
      m.lights.emplace_back(v.x, v.y, v.z);
    }
    if (j.contains("exposures"))
      m.exposures = j.at("exposures").get<std::map<std::string, std::vector<double>>>();
    for (const auto& fj : j.at("files"))
      m.files.push_back({fj.at("band").get<std::string>(), fj.at("light").get<int>(),
                         fj.value("ev", 0), fj.at("path").get<std::string>()});
    if (j.contains("extras")) m.extras = j.at("extras");
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(pfm::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  Manifest m = manifest_from_json(j);
  m.root = path.parent_path();
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  pfm::write_file(path, to_json(m).dump(2) + "\n");
}

/// Decodes one image file into a Capture. Integer PNGs are scaled to [0,1]; PFM values
/// pass through unchanged.
inline Capture load_capture(const std::filesystem::path& path, const CaptureKey& key) {
  if (!std::filesystem::exists(path))
    throw LoadError("missing image for " + describe(key) + ": " + path.string());
  const std::string bytes = pfm::read_file(path);
  Capture cap;
  int w, h, ch;
  std::vector<float> data;
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'f' || bytes[1] == 'F')) {
    pfm::Raw raw = pfm::decode(bytes, path.string());
    w = raw.width, h = raw.height, ch = raw.channels;
    data = std::move(raw.data);
  } else {
    png::Decoded d = png::decode(bytes, path.string());
    w = d.width, h = d.height, ch = d.channels;
    data = std::move(d.data);
  }
  cap.radiance = GrayImage(w, h);
  if (ch == 1) {
    for (std::size_t i = 0; i < cap.radiance.size(); ++i) cap.radiance[i] = data[i];
  } else {
    RgbImage color(w, h);
    for (std::size_t i = 0; i < color.size(); ++i) {
      color[i] = {data[3 * i], data[3 * i + 1], data[3 * i + 2]};
      cap.radiance[i] = static_cast<float>(luminance(color[i]));
    }
    cap.color = std::move(color);
  }
  for (float v : cap.radiance)
    if (!(v >= 0.0f)) throw LoadError("image " + describe(key) + " has negative or NaN values");
  return cap;
}

inline SpectralStack load_dataset(const Manifest& m) {
  std::vector<std::pair<CaptureKey, Capture>> loaded;
  for (const auto& f : m.files) {
    const CaptureKey key{f.band, f.light, f.ev};
    loaded.emplace_back(key, load_capture(m.root / f.path, key));
  }
  if (loaded.empty()) throw LoadError("manifest lists no files");
  SpectralStack stack(loaded.front().second.radiance.width(),
                      loaded.front().second.radiance.height());
  stack.bands = m.bands;
  stack.lights = m.lights;
  stack.exposures = m.exposures;
  for (auto& [k, c] : loaded) stack.add(k, std::move(c));
  stack.validate();
  return stack;
}

inline SpectralStack load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path));
}

} // namespace spectra
