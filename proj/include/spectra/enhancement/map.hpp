#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spectra/core/types.hpp"

namespace spectra::enhancement {

enum class EnhancementKind { dynamic, static_curvature };

/// Per-pixel near-infrared enhancement weight C in [0, 1].
struct EnhancementMap {
  GrayImage C;
  EnhancementKind kind = EnhancementKind::dynamic;
  std::optional<LightDirection> light; // dynamic only
  int radius = 0;                      // dynamic only
  double threshold = 0.0;
  std::vector<std::string> bands;
};

/// Enhancement from several near-infrared bands plus the per-pixel winning band
/// (index into the band list, -1 where no band is valid).
struct MultibandEnhancement {
  EnhancementMap map;
  Image<int> winner;
};

namespace detail {

/// Argmax over candidate values; ties go to the longer wavelength, then to the later entry.
inline int pick_winner(const std::vector<double>& values, const std::vector<double>& wavelengths,
                       const std::vector<bool>& usable) {
  int best = -1;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!usable[k]) continue;
    if (best < 0) {
      best = static_cast<int>(k);
      continue;
    }
    const auto b = static_cast<std::size_t>(best);
    if (values[k] > values[b] || (values[k] == values[b] && wavelengths[k] >= wavelengths[b]))
      best = static_cast<int>(k);
  }
  return best;
}

} // namespace detail

} // namespace spectra::enhancement
