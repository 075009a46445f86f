#pragma once

#include <cmath>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"

namespace spectra {

// BT.601 luma weights with analog YUV chroma scaling.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;
inline constexpr double kChromaU = 0.492111;
inline constexpr double kChromaV = 0.877283;

inline double luminance(const Color3& c) { return kLumaR * c[0] + kLumaG * c[1] + kLumaB * c[2]; }

inline Color3 rgb_to_yuv(const Color3& rgb) {
  for (float v : rgb)
    if (!std::isfinite(v)) throw ParameterError("rgb_to_yuv: non-finite channel");
  const double y = luminance(rgb);
  return {static_cast<float>(y), static_cast<float>(kChromaU * (rgb[2] - y)),
          static_cast<float>(kChromaV * (rgb[0] - y))};
}

inline Color3 yuv_to_rgb(const Color3& yuv) {
  for (float v : yuv)
    if (!std::isfinite(v)) throw ParameterError("yuv_to_rgb: non-finite channel");
  const double y = yuv[0];
  const double r = y + yuv[2] / kChromaV;
  const double b = y + yuv[1] / kChromaU;
  const double g = (y - kLumaR * r - kLumaB * b) / kLumaG;
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

inline RgbImage rgb_to_yuv(const RgbImage& img) {
  return map_pixels(img, [](const Color3& c) { return rgb_to_yuv(c); });
}

inline RgbImage yuv_to_rgb(const RgbImage& img) {
  return map_pixels(img, [](const Color3& c) { return yuv_to_rgb(c); });
}

inline GrayImage luminance(const RgbImage& img) {
  return map_pixels(img, [](const Color3& c) { return static_cast<float>(luminance(c)); });
}

inline RgbImage gray_to_rgb(const GrayImage& img) {
  return map_pixels(img, [](float v) { return Color3{v, v, v}; });
}

} // namespace spectra
