#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/image.hpp"
#include "spectra/photometric/fft.hpp"

namespace spectra::photometric {

struct WelchParams {
  /// Samples per segment; 0 selects region row length / 4.
  int segment_length = 0;
  double overlap = 0.5;
  /// Square analysis region side; 0 analyzes the whole image as one region. Regions
  /// overlap by half their side.
  int region_size = 32;
};

/// Welch-averaged spectra of two equally long real signals. Segments are mean-detrended,
/// Hann-windowed (periodic) and zero-padded to a power-of-two transform length.
struct CrossSpectrum {
  int segment_length = 0;
  int nfft = 0;
  int hop = 0;
  std::vector<double> pxx;
  std::vector<double> pyy;
  std::vector<Complex> pxy; // sum over segments of conj(X) * Y
  /// Magnitude-squared coherence per one-sided bin (nfft/2 + 1 bins), in [0,1].
  std::vector<double> coherence;
};

inline std::vector<double> hann_periodic(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

namespace detail {

/// Visits segment starts 0, hop, 2*hop, ... until a segment reaches the end of the
/// signal; the last segment may be partial and is zero-padded.
template <class F>
void for_each_segment(std::size_t n, int seg, int hop, F&& f) {
  for (std::size_t start = 0;; start += static_cast<std::size_t>(hop)) {
    f(start);
    if (start + static_cast<std::size_t>(seg) >= n) break;
  }
}

inline std::vector<Complex> segment_spectrum(std::span<const double> s, std::size_t start, int seg,
                                             int nfft, const std::vector<double>& window) {
  std::vector<Complex> buf(static_cast<std::size_t>(nfft), Complex{});
  const std::size_t avail = std::min<std::size_t>(static_cast<std::size_t>(seg), s.size() - start);
  double mean = 0.0;
  for (std::size_t i = 0; i < avail; ++i) mean += s[start + i];
  mean /= static_cast<double>(avail);
  for (int i = 0; i < seg; ++i) {
    const double v = static_cast<std::size_t>(i) < avail ? s[start + static_cast<std::size_t>(i)] : 0.0;
    buf[static_cast<std::size_t>(i)] = (v - mean) * window[static_cast<std::size_t>(i)];
  }
  fft(buf);
  return buf;
}

} // namespace detail

inline int resolve_segment_length(const WelchParams& p, int row_length) {
  const int seg = p.segment_length > 0 ? p.segment_length : row_length / 4;
  return std::max(seg, 4);
}

inline int resolve_hop(int seg, double overlap) {
  return std::max(1, seg - static_cast<int>(std::lround(seg * overlap)));
}

/// Welch's averaged modified periodogram estimate of the magnitude-squared coherence.
/// A bin where both auto-spectra vanish reports 1; a bin where only one vanishes reports 0.
inline CrossSpectrum welch_coherence(std::span<const double> x, std::span<const double> y, int seg,
                                     double overlap = 0.5) {
  if (x.size() != y.size()) throw StructuralError("welch_coherence: signal length mismatch");
  if (seg < 2) throw ParameterError("welch_coherence: segment length must be >= 2");
  CrossSpectrum cs;
  cs.segment_length = seg;
  cs.nfft = static_cast<int>(next_power_of_two(static_cast<std::size_t>(seg)));
  cs.hop = resolve_hop(seg, overlap);
  const std::size_t bins = static_cast<std::size_t>(cs.nfft / 2 + 1);
  cs.pxx.assign(bins, 0.0);
  cs.pyy.assign(bins, 0.0);
  cs.pxy.assign(bins, Complex{});
  const auto window = hann_periodic(seg);
  detail::for_each_segment(x.size(), seg, cs.hop, [&](std::size_t start) {
    const auto X = detail::segment_spectrum(x, start, seg, cs.nfft, window);
    const auto Y = detail::segment_spectrum(y, start, seg, cs.nfft, window);
    for (std::size_t k = 0; k < bins; ++k) {
      cs.pxx[k] += std::norm(X[k]);
      cs.pyy[k] += std::norm(Y[k]);
      cs.pxy[k] += std::conj(X[k]) * Y[k];
    }
  });
  double ex = 0.0, ey = 0.0;
  for (std::size_t k = 0; k < bins; ++k) ex += cs.pxx[k], ey += cs.pyy[k];
  cs.coherence.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool x0 = cs.pxx[k] <= 1e-12 * ex || ex <= 0.0;
    const bool y0 = cs.pyy[k] <= 1e-12 * ey || ey <= 0.0;
    if (x0 && y0) cs.coherence[k] = 1.0;
    else if (x0 || y0) cs.coherence[k] = 0.0;
    else cs.coherence[k] = std::clamp(std::norm(cs.pxy[k]) / (cs.pxx[k] * cs.pyy[k]), 0.0, 1.0);
  }
  return cs;
}

struct RegionCoherence {
  int x0 = 0, y0 = 0, width = 0, height = 0;
  /// One spectrum per pair (EV0, EVk), k = 1..n-1.
  std::vector<std::vector<double>> coherence;
  std::vector<std::vector<unsigned char>> flagged;
};

/// Coherence of EV0 against each longer exposure over image regions, with a spatial map
/// of where the incoherent energy lives.
struct CoherenceReport {
  double th_ev = 0.13;
  std::vector<RegionCoherence> regions;
  /// Normalized [0,1] energy of the part of EVk not linearly predictable from EV0,
  /// restricted to flagged bins and mapped back to pixels (max over pairs and regions).
  GrayImage suspicion;

  /// Fraction of flagged bins for one exposure pair, over all regions.
  double flagged_fraction(std::size_t pair) const {
    std::size_t n = 0, total = 0;
    for (const auto& r : regions) {
      for (unsigned char v : r.flagged.at(pair)) n += v;
      total += r.flagged.at(pair).size();
    }
    return total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total);
  }

  double mean_coherence(std::size_t pair) const {
    double sum = 0.0;
    std::size_t total = 0;
    for (const auto& r : regions) {
      for (double c : r.coherence.at(pair)) sum += c;
      total += r.coherence.at(pair).size();
    }
    return total == 0 ? 1.0 : sum / static_cast<double>(total);
  }
};

namespace detail {

inline std::vector<int> region_starts(int extent, int size) {
  if (size >= extent) return {0};
  const int stride = std::max(1, size / 2);
  std::vector<int> out;
  for (int s = 0; s + size < extent; s += stride) out.push_back(s);
  out.push_back(extent - size);
  return out;
}

inline std::vector<double> region_scan(const GrayImage& img, int x0, int y0, int w, int h) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) out.push_back(img(x, y));
  return out;
}

} // namespace detail

/// Computes coherence on the row-major scan of each region of each exposure. Flags bins
/// with C_xy < th_ev and back-projects the residual Y - H X (H = Pxy / Pxx) at those bins.
inline CoherenceReport coherence_mask(std::span<const GrayImage> ev_images, double th_ev = 0.13,
                                      const WelchParams& params = {}) {
  if (ev_images.size() < 2) throw ParameterError("coherence_mask: needs at least 2 exposures");
  if (th_ev < 0.0 || th_ev > 1.0) throw ParameterError("coherence_mask: th_ev must lie in [0,1]");
  const GrayImage& ev0 = ev_images[0];
  for (const auto& img : ev_images) require_same_shape(img, ev0, "coherence_mask exposures");

  const int w = ev0.width(), h = ev0.height();
  const int rw = params.region_size > 0 ? std::min(params.region_size, w) : w;
  const int rh = params.region_size > 0 ? std::min(params.region_size, h) : h;
  const std::size_t n = static_cast<std::size_t>(rw) * static_cast<std::size_t>(rh);
  const int seg = std::min<int>(resolve_segment_length(params, rw), static_cast<int>(n));
  const auto window = hann_periodic(seg);

  CoherenceReport rep;
  rep.th_ev = th_ev;
  rep.suspicion = GrayImage(w, h, 0.0f);
  Image<double> energy(w, h, 0.0);

  for (int y0 : detail::region_starts(h, rh))
    for (int x0 : detail::region_starts(w, rw)) {
      RegionCoherence rc{x0, y0, rw, rh, {}, {}};
      const std::vector<double> x = detail::region_scan(ev0, x0, y0, rw, rh);
      for (std::size_t k = 1; k < ev_images.size(); ++k) {
        const std::vector<double> y = detail::region_scan(ev_images[k], x0, y0, rw, rh);
        const CrossSpectrum cs = welch_coherence(x, y, seg, params.overlap);
        std::vector<unsigned char> flag(cs.coherence.size());
        bool any = false;
        for (std::size_t b = 0; b < flag.size(); ++b) {
          flag[b] = cs.coherence[b] < th_ev ? 1 : 0;
          any = any || flag[b];
        }
        rc.coherence.push_back(cs.coherence);
        rc.flagged.push_back(flag);
        if (!any) continue;

        std::vector<double> pair_energy(n, 0.0);
        const auto half = static_cast<std::size_t>(cs.nfft / 2);
        detail::for_each_segment(n, seg, cs.hop, [&](std::size_t start) {
          const auto X = detail::segment_spectrum(x, start, seg, cs.nfft, window);
          const auto Y = detail::segment_spectrum(y, start, seg, cs.nfft, window);
          std::vector<Complex> r(static_cast<std::size_t>(cs.nfft), Complex{});
          for (std::size_t b = 0; b <= half; ++b) {
            if (!flag[b]) continue;
            const Complex tf = cs.pxx[b] > 0.0 ? cs.pxy[b] / cs.pxx[b] : Complex{};
            r[b] = Y[b] - tf * X[b];
            if (b != 0 && b != half) r[static_cast<std::size_t>(cs.nfft) - b] = std::conj(r[b]);
          }
          fft(r, true);
          for (int i = 0; i < seg && start + static_cast<std::size_t>(i) < n; ++i)
            pair_energy[start + static_cast<std::size_t>(i)] +=
                r[static_cast<std::size_t>(i)].real() * r[static_cast<std::size_t>(i)].real();
        });
        for (std::size_t i = 0; i < n; ++i) {
          const int px = x0 + static_cast<int>(i % static_cast<std::size_t>(rw));
          const int py = y0 + static_cast<int>(i / static_cast<std::size_t>(rw));
          energy(px, py) = std::max(energy(px, py), pair_energy[i]);
        }
      }
      rep.regions.push_back(std::move(rc));
    }

  const double peak = *std::max_element(energy.begin(), energy.end());
  if (peak > 0.0)
    for (std::size_t i = 0; i < energy.size(); ++i)
      rep.suspicion[i] = static_cast<float>(energy[i] / peak);
  return rep;
}

} // namespace spectra::photometric
