#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <numeric>
#include <random>

#include "spectra/photometric/coherence.hpp"
#include "spectra/photometric/fft.hpp"
#include "spectra/photometric/highlight.hpp"
#include "spectra/photometric/normals.hpp"
#include "spectra/photometric/specular.hpp"
#include "spectra/synth/render.hpp"
#include "spectra/synth/report.hpp"
#include "spectra/synth/scene.hpp"

namespace spectra::photometric {
namespace {

using cd = std::complex<double>;

std::vector<cd> direct_dft(const std::vector<double>& x, int nfft) {
  std::vector<cd> out(static_cast<std::size_t>(nfft));
  for (int k = 0; k < nfft; ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t)
      acc += x[t] * std::polar(1.0, -2.0 * kPi * k * static_cast<double>(t) / nfft);
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

// Independent Welch reference: segments tile the signal exactly, direct DFT.
std::vector<double> reference_coherence(const std::vector<double>& x, const std::vector<double>& y,
                                        int seg, int hop) {
  int nfft = 1;
  while (nfft < seg) nfft *= 2;
  const int bins = nfft / 2 + 1;
  std::vector<double> sxx(bins), syy(bins);
  std::vector<cd> sxy(bins);
  for (std::size_t s = 0; s + seg <= x.size(); s += hop) {
    std::vector<double> a(seg), b(seg);
    double ma = 0, mb = 0;
    for (int i = 0; i < seg; ++i) ma += x[s + i], mb += y[s + i];
    ma /= seg, mb /= seg;
    for (int i = 0; i < seg; ++i) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * kPi * i / seg));
      a[i] = (x[s + i] - ma) * w;
      b[i] = (y[s + i] - mb) * w;
    }
    const auto A = direct_dft(a, nfft), B = direct_dft(b, nfft);
    for (int k = 0; k < bins; ++k) {
      sxx[k] += std::norm(A[k]);
      syy[k] += std::norm(B[k]);
      sxy[k] += std::conj(A[k]) * B[k];
    }
  }
  std::vector<double> c(bins);
  for (int k = 0; k < bins; ++k) c[k] = std::norm(sxy[k]) / (sxx[k] * syy[k]);
  return c;
}

TEST(Fft, MatchesDirectDft) {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(64);
  for (auto& v : x) v = g(rng);
  std::vector<Complex> a(x.begin(), x.end());
  fft(a);
  const auto ref = direct_dft(x, 64);
  for (int k = 0; k < 64; ++k) EXPECT_NEAR(std::abs(a[k] - ref[k]), 0.0, 1e-9);
  fft(a, true);
  for (int k = 0; k < 64; ++k) EXPECT_NEAR(a[k].real(), x[k], 1e-12);
  std::vector<Complex> bad(12);
  EXPECT_THROW(fft(bad), ParameterError);
}

TEST(Coherence, MatchesReferenceWelch) {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> x(256), y(256);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = 0.6 * x[i] + (i > 0 ? 0.3 * x[i - 1] : 0.0) + 0.5 * g(rng);
  }
  const auto cs = welch_coherence(x, y, 32, 0.5);
  const auto ref = reference_coherence(x, y, 32, 16);
  ASSERT_EQ(cs.coherence.size(), ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(cs.coherence[k], ref[k], 1e-9) << k;
}

TEST(Coherence, NonPowerOfTwoSegmentIsZeroPadded) {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x(24 + 12 * 9), y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g(rng), y[i] = x[i] + 0.7 * g(rng);
  const auto cs = welch_coherence(x, y, 24, 0.5);
  EXPECT_EQ(cs.nfft, 32);
  const auto ref = reference_coherence(x, y, 24, 12);
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(cs.coherence[k], ref[k], 1e-9);
}

TEST(Coherence, SelfCoherenceIsOne) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> x(512);
  for (auto& v : x) v = u(rng);
  const auto cs = welch_coherence(x, x, 32);
  for (double c : cs.coherence) EXPECT_NEAR(c, 1.0, 1e-9);
}

GrayImage textured(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.05f, 0.25f);
  GrayImage img(w, h);
  for (auto& v : img) v = u(rng);
  return img;
}

TEST(CoherenceMask, PureGainIsCoherentEverywhere) {
  const GrayImage ev0 = textured(64, 64, 2);
  GrayImage ev1 = ev0;
  for (auto& v : ev1) v *= 2.0f;
  const std::vector<GrayImage> evs{ev0, ev1};
  for (int region : {0, 32}) {
    WelchParams p;
    p.region_size = region;
    const auto rep = coherence_mask(evs, 0.13, p);
    EXPECT_EQ(rep.flagged_fraction(0), 0.0);
    EXPECT_GT(rep.mean_coherence(0), 0.999);
    for (float s : rep.suspicion) EXPECT_EQ(s, 0.0f);
  }
}

TEST(CoherenceMask, IndependentNoiseIsMostlyFlagged) {
  const std::vector<GrayImage> evs{textured(128, 128, 3), textured(128, 128, 4)};
  WelchParams p;
  p.region_size = 0;
  const auto rep = coherence_mask(evs, 0.13, p);
  EXPECT_LT(rep.mean_coherence(0), 0.1);
  EXPECT_GT(rep.flagged_fraction(0), 0.5);
}

TEST(CoherenceMask, BloomRegionIsMoreSuspicious) {
  const int n = 128;
  GrayImage ev0 = textured(n, n, 9);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double r2 = (x - 40.0) * (x - 40.0) + (y - 70.0) * (y - 70.0);
      ev0(x, y) += static_cast<float>(0.8 * std::exp(-r2 / 300.0));
    }
  std::vector<GrayImage> evs{ev0, ev0, ev0};
  for (int k = 1; k < 3; ++k)
    for (auto& v : evs[k]) v = std::min(1.0f, v * static_cast<float>(k + 1));
  const auto rep = coherence_mask(evs, 0.13);
  double bloom = 0, back = 0;
  int nb = 0, nk = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double r = std::hypot(x - 40.0, y - 70.0);
      if (r < 6) {
        bloom += rep.suspicion(x, y), ++nb;
      } else if (r > 40) {
        back += rep.suspicion(x, y), ++nk;
      }
    }
  EXPECT_GT(bloom / nb, back / nk);
}

TEST(CoherenceMask, ValuesInUnitInterval) {
  const std::vector<GrayImage> evs{textured(64, 64, 5), textured(64, 64, 6), textured(64, 64, 7)};
  const auto rep = coherence_mask(evs);
  for (const auto& r : rep.regions)
    for (const auto& c : r.coherence)
      for (double v : c) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
  for (float s : rep.suspicion) {
    EXPECT_GE(s, 0.0f);
    EXPECT_LE(s, 1.0f);
  }
}

TEST(CoherenceMask, NeedsTwoExposures) {
  const std::vector<GrayImage> one{textured(8, 8, 1)};
  EXPECT_THROW(coherence_mask(one), ParameterError);
}

TEST(ForwardRadiance, Examples) {
  const LightDirection up(0, 0, 1);
  EXPECT_DOUBLE_EQ(forward_radiance({1, 1, 1}, {0, 0, 1}, up), 1.0);
  EXPECT_DOUBLE_EQ(forward_radiance({1, 1, 1}, {1, 0, 0}, up), 0.0);
  const LightDirection l60 = LightDirection::from_angles(0.0, kPi / 6.0);
  EXPECT_NEAR(forward_radiance({2, 1, 0.5}, {0, 0, 1}, l60), 0.5, 1e-12);
  EXPECT_THROW(RadianceModel(0, 1, 1), ParameterError);
}

TEST(SpecularFree, HighlightFreeInputIsUnchanged) {
  const GrayImage s = textured(16, 16, 1);
  EXPECT_EQ(specular_free(s, s, 5), s);
  const GrayImage once = specular_free(s, s, 3);
  EXPECT_EQ(specular_free(once, once, 3), once);
}

TEST(SpecularFree, ZeroIterationsReturnsHighlightedImage) {
  const GrayImage so(8, 8, 0.3f);
  GrayImage sh = so;
  sh(4, 4) = 1.0f;
  EXPECT_EQ(specular_free(so, sh, 0), sh);
}

TEST(SpecularFree, SaturatedPixelFallsToNeighborhood) {
  const GrayImage so(9, 9, 0.3f);
  GrayImage sh = so;
  sh(4, 4) = 1.0f;
  const GrayImage out = specular_free(so, sh, 5);
  EXPECT_FLOAT_EQ(out(4, 4), 0.3f);
}

TEST(SpecularFree, MaximumNonIncreasingAndBoundedByInput) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  GrayImage so(20, 20), sh(20, 20);
  for (std::size_t i = 0; i < so.size(); ++i) {
    so[i] = u(rng);
    sh[i] = so[i] + (u(rng) < 0.2f ? u(rng) : 0.0f);
  }
  float prev = *std::max_element(sh.begin(), sh.end());
  for (int it = 0; it <= 6; ++it) {
    const GrayImage out = specular_free(so, sh, it);
    const float mx = *std::max_element(out.begin(), out.end());
    EXPECT_LE(mx, prev);
    prev = mx;
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_LE(out[i], sh[i] + 1e-6f);
  }
}

std::vector<GrayImage> render(const NormalMap& n, const std::vector<LightDirection>& lights,
                              double albedo = 1.0) {
  std::vector<GrayImage> out;
  const RadianceModel m(1.0, 1.0, albedo);
  for (const auto& l : lights) {
    GrayImage img(n.width(), n.height(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (n.mask[i]) img[i] = static_cast<float>(forward_radiance(m, n.normals[i], l));
    out.push_back(std::move(img));
  }
  return out;
}

TEST(SolveNormals, PlaneIsRecoveredExactly) {
  NormalMap plane(6, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) plane.set(x, y, {0, 0, 1});
  const std::vector<LightDirection> lights{LightDirection::normalize({1, 0, 1}),
                                           LightDirection::normalize({0, 1, 1}),
                                           LightDirection(0, 0, 1)};
  const auto n = solve_normals(render(plane, lights), lights);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      ASSERT_TRUE(n.valid(x, y));
      EXPECT_NEAR(n.normals(x, y).x, 0.0, 1e-6);
      EXPECT_NEAR(n.normals(x, y).y, 0.0, 1e-6);
      EXPECT_NEAR(n.normals(x, y).z, 1.0, 1e-6);
    }
}

TEST(SolveNormals, FullyMaskedPixelIsInvalid) {
  NormalMap plane(3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) plane.set(x, y, {0, 0, 1});
  const std::vector<LightDirection> lights{LightDirection::normalize({1, 0, 1}),
                                           LightDirection::normalize({0, 1, 1}),
                                           LightDirection(0, 0, 1)};
  HighlightMask hm;
  for (int i = 0; i < 3; ++i) {
    Mask m(3, 3, 0);
    m(1, 1) = 1;
    hm.per_light.push_back(m);
  }
  const auto n = solve_normals(render(plane, lights), lights, &hm);
  EXPECT_FALSE(n.valid(1, 1));
  EXPECT_TRUE(n.valid(0, 0));
}

TEST(SolveNormals, RankDeficientLightsRejected) {
  const std::vector<LightDirection> coplanar{LightDirection::normalize({1, 0, 1}),
                                             LightDirection(0, 0, 1),
                                             LightDirection::normalize({-1, 0, 1})};
  const std::vector<GrayImage> imgs(3, GrayImage(2, 2, 0.5f));
  EXPECT_THROW(solve_normals(imgs, coplanar), ConfigurationError);
}

TEST(SolveNormals, SphereWith37LightsIsAccurate) {
  const auto scene = synth::gen_sphere(48);
  const auto lights = synth::light_rig_37();
  const auto n = solve_normals(render(scene.gt_top, lights, 0.7), lights);
  EXPECT_LT(synth::angular_error(n, scene.gt_top).mean, 0.1);
}

TEST(SolveNormals, AlbedoScalingInvariance) {
  const auto scene = synth::gen_sphere(20);
  const auto lights = synth::light_rig_37();
  auto imgs = render(scene.gt_top, lights, 0.4);
  const auto a = solve_normals(imgs, lights);
  for (auto& img : imgs)
    for (auto& v : img) v *= 2.0f;
  const auto b = solve_normals(imgs, lights);
  ASSERT_EQ(a.mask, b.mask);
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (!a.mask[i]) continue;
    EXPECT_LT(angle_deg(a.normals[i], b.normals[i]), 1e-3);
    EXPECT_NEAR((*b.albedo)[i], 2.0f * (*a.albedo)[i], 1e-4);
  }
}

TEST(SolveNormals, LightPermutationInvariance) {
  const auto scene = synth::gen_sphere(20);
  auto lights = synth::light_rig_37();
  auto imgs = render(scene.gt_top, lights, 0.6);
  const auto a = solve_normals(imgs, lights);
  std::vector<std::size_t> order(lights.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937(4));
  std::vector<LightDirection> pl;
  std::vector<GrayImage> pi;
  for (std::size_t i : order) pl.push_back(lights[i]), pi.push_back(imgs[i]);
  const auto b = solve_normals(pi, pl);
  ASSERT_EQ(a.mask, b.mask);
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (!a.mask[i]) continue;
    EXPECT_LT(angle_deg(a.normals[i], b.normals[i]), 1e-4);
  }
}

NormalMap constant_map(int w, int h, const Vec3& v) {
  NormalMap n(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) n.set(x, y, normalized(v));
  return n;
}

TEST(CombineBispectral, Examples) {
  const NormalMap vis = constant_map(8, 6, {0, 0, 1});
  NormalMap bis = constant_map(8, 6, {1, 0, 1});
  bis.invalidate(2, 2);
  EXPECT_EQ(combine_bispectral(vis, bis, GrayImage(8, 6, 0.0f)).normals, vis.normals);
  const auto full = combine_bispectral(vis, bis, GrayImage(8, 6, 1.0f));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      EXPECT_EQ(full.normals(x, y), (x == 2 && y == 2) ? vis.normals(x, y) : bis.normals(x, y));
  GrayImage half(8, 6, 0.0f);
  for (int y = 0; y < 6; ++y)
    for (int x = 4; x < 8; ++x) half(x, y) = 0.9f;
  const auto out = combine_bispectral(vis, bis, half);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x)
      EXPECT_EQ(out.normals(x, y), x >= 4 ? bis.normals(x, y) : vis.normals(x, y));
}

TEST(Highlights, PipelineBeatsPlainSolve) {
  const auto scene = synth::gen_sphere(40);
  synth::RenderOptions o;
  o.albedo = 0.2;
  o.specular_strength = 0.5;
  o.shininess = 30;
  o.exposures = {0.25, 0.5, 1.0};
  const auto stack = synth::render_synthetic_stack(
      scene, synth::light_rig_37(), {{Band("vis", 400, 700, BandKind::visible_combined), 0.0}}, o);
  const double plain = synth::angular_error(solve_normals(stack, "vis"), scene.gt_top).mean;
  const auto res = remove_highlights(stack, "vis");
  const double cleaned = synth::angular_error(res.normals, scene.gt_top).mean;
  EXPECT_LT(cleaned, 0.5 * plain);
}

} // namespace
} // namespace spectra::photometric
