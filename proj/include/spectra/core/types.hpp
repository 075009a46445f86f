#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/core/vec.hpp"

namespace spectra {

enum class BandKind {
  visible_r,
  visible_g,
  visible_b,
  visible_combined,
  nir,
  uv_excitation,
  bispectral_emission,
};

inline const char* to_string(BandKind k) {
  switch (k) {
  case BandKind::visible_r: return "visible-r";
  case BandKind::visible_g: return "visible-g";
  case BandKind::visible_b: return "visible-b";
  case BandKind::visible_combined: return "visible-combined";
  case BandKind::nir: return "nir";
  case BandKind::uv_excitation: return "uv-excitation";
  case BandKind::bispectral_emission: return "bispectral-emission";
  }
  return "?";
}

inline BandKind band_kind_from_string(const std::string& s) {
  for (BandKind k : {BandKind::visible_r, BandKind::visible_g, BandKind::visible_b,
                     BandKind::visible_combined, BandKind::nir, BandKind::uv_excitation,
                     BandKind::bispectral_emission}) {
    if (s == to_string(k)) return k;
  }
  throw ParameterError("unknown band kind '" + s + "'");
}

inline bool is_visible(BandKind k) {
  return k == BandKind::visible_r || k == BandKind::visible_g || k == BandKind::visible_b ||
         k == BandKind::visible_combined;
}

/// A captured wavelength range. A single center wavelength is stored as low == high.
struct Band {
  std::string label;
  double low_nm = 0.0;
  double high_nm = 0.0;
  BandKind kind = BandKind::visible_combined;

  Band() = default;
  Band(std::string l, double low, double high, BandKind k)
      : label(std::move(l)), low_nm(low), high_nm(high), kind(k) {
    if (low_nm > high_nm) throw ParameterError("band '" + label + "': wavelength low > high");
  }

  double center_nm() const { return 0.5 * (low_nm + high_nm); }
  bool operator==(const Band&) const = default;
};

/// Unit light direction in the camera frame, z toward the viewer.
class LightDirection {
public:
  LightDirection() = default;

  /// Validates unit length within 1e-6.
  LightDirection(double x, double y, double z) : v_{x, y, z} {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
        std::abs(norm(v_) - 1.0) > 1e-6)
      throw ParameterError("light direction must be a finite unit vector");
  }

  static LightDirection normalize(const Vec3& v) {
    const Vec3 n = normalized(v);
    if (n == Vec3{}) throw ParameterError("cannot normalize zero light direction");
    return {n.x, n.y, n.z};
  }

  static LightDirection from_angles(double azimuth_rad, double elevation_rad) {
    return normalize({std::cos(elevation_rad) * std::cos(azimuth_rad),
                      std::cos(elevation_rad) * std::sin(azimuth_rad), std::sin(elevation_rad)});
  }

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x; }
  double y() const { return v_.y; }
  double z() const { return v_.z; }

  bool operator==(const LightDirection&) const = default;

private:
  Vec3 v_{0.0, 0.0, 1.0};
};

/// Per-pixel unit normals with a validity mask. Invalid pixels hold the zero vector.
struct NormalMap {
  Image<Vec3> normals;
  Mask mask;
  Band band;
  std::optional<GrayImage> albedo;

  NormalMap() = default;
  NormalMap(int w, int h) : normals(w, h), mask(w, h, 0) {}

  int width() const { return normals.width(); }
  int height() const { return normals.height(); }
  bool valid(int x, int y) const { return mask(x, y) != 0; }

  void set(int x, int y, const Vec3& n) {
    normals(x, y) = n;
    mask(x, y) = 1;
  }
  void invalidate(int x, int y) {
    normals(x, y) = Vec3{};
    mask(x, y) = 0;
  }

  std::size_t valid_count() const {
    std::size_t c = 0;
    for (unsigned char m : mask) c += m ? 1 : 0;
    return c;
  }

  /// Builds a map from unit vectors; zero vectors become invalid pixels.
  static NormalMap from_vectors(const Image<Vec3>& v) {
    NormalMap out(v.width(), v.height());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double n = norm(v[i]);
      if (n > 0.0) {
        out.normals[i] = v[i] / n;
        out.mask[i] = 1;
      }
    }
    return out;
  }
};

struct CaptureKey {
  std::string band;
  int light = 0;
  int exposure = 0;
  auto operator<=>(const CaptureKey&) const = default;
};

inline std::string describe(const CaptureKey& k) {
  return "(band=" + k.band + ", light=" + std::to_string(k.light) +
         ", ev=" + std::to_string(k.exposure) + ")";
}

struct Capture {
  GrayImage radiance;
  /// Present when the source image had color channels.
  std::optional<RgbImage> color;
};

/// Every radiance image of one dataset, indexed by (band, light, exposure).
class SpectralStack {
public:
  SpectralStack() = default;
  SpectralStack(int width, int height) : width_(width), height_(height) {}

  int width() const { return width_; }
  int height() const { return height_; }

  std::vector<Band> bands;
  std::vector<LightDirection> lights;
  std::map<std::string, std::vector<double>> exposures;

  void add(const CaptureKey& key, Capture capture) {
    if (capture.radiance.width() != width_ || capture.radiance.height() != height_)
      throw StructuralError("image " + describe(key) + " is " +
                            std::to_string(capture.radiance.width()) + "x" +
                            std::to_string(capture.radiance.height()) + ", stack is " +
                            std::to_string(width_) + "x" + std::to_string(height_));
    images_[key] = std::move(capture);
  }

  bool has(const CaptureKey& key) const { return images_.count(key) != 0; }

  const Capture& capture(const CaptureKey& key) const {
    auto it = images_.find(key);
    if (it == images_.end()) throw LoadError("no image for " + describe(key));
    return it->second;
  }

  const GrayImage& image(const std::string& band, int light, int exposure = 0) const {
    return capture({band, light, exposure}).radiance;
  }

  const Band& band(const std::string& label) const {
    for (const auto& b : bands)
      if (b.label == label) return b;
    throw ParameterError("unknown band '" + label + "'");
  }

  /// Light indices with at least one exposure for this band, ascending.
  std::vector<int> lights_for(const std::string& band) const {
    std::vector<int> out;
    for (const auto& [k, v] : images_)
      if (k.band == band && k.exposure == 0) out.push_back(k.light);
    return out;
  }

  int exposure_count(const std::string& band, int light) const {
    int n = 0;
    while (has({band, light, n})) ++n;
    return n;
  }

  const std::map<CaptureKey, Capture>& captures() const { return images_; }

  /// Checks the cross-field invariants; throws StructuralError on violation.
  void validate() const {
    std::vector<std::string> labels;
    for (const auto& b : bands) {
      if (std::find(labels.begin(), labels.end(), b.label) != labels.end())
        throw StructuralError("duplicate band label '" + b.label + "'");
      labels.push_back(b.label);
    }
    for (const auto& [k, c] : images_) {
      if (std::find(labels.begin(), labels.end(), k.band) == labels.end())
        throw StructuralError("image " + describe(k) + " references unknown band");
      if (k.light < 0 || k.light >= static_cast<int>(lights.size()))
        throw StructuralError("image " + describe(k) + " references unknown light");
      if (!has({k.band, k.light, 0}))
        throw StructuralError("image " + describe(k) + " has no EV0 sibling");
    }
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::map<CaptureKey, Capture> images_;
};

} // namespace spectra
