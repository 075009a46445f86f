#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "spectra/registration/align.hpp"
#include "spectra/registration/homography.hpp"
#include "spectra/registration/rsncc.hpp"
#include "spectra/registration/warp.hpp"

namespace spectra::registration {
namespace {

// Sum of random Gaussian blobs, evaluated at continuous positions so warped copies need no
// resampling.
struct BlobTexture {
  struct Blob {
    double x, y, s, a;
  };
  std::vector<Blob> blobs;

  BlobTexture(int n, unsigned seed, int count = 60) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < count; ++k) blobs.push_back({u(rng) * n, u(rng) * n, 2.0 + 6.0 * u(rng), u(rng) - 0.3});
  }

  double operator()(double x, double y) const {
    double v = 0.0;
    for (const auto& b : blobs) v += b.a * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2.0 * b.s * b.s));
    return v;
  }

  template <class Map>
  GrayImage render(int n, Map&& source_of) const {
    GrayImage img(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const Vec2 q = source_of(x, y);
        img(x, y) = static_cast<float>((*this)(q.x, q.y));
      }
    return img;
  }

  GrayImage render(int n) const {
    return render(n, [](int x, int y) { return Vec2{double(x), double(y)}; });
  }
};

GrayImage noise_image(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(n, n);
  for (auto& v : img) v = static_cast<float>(u(rng));
  return img;
}

SpectralStack stack_from(const std::vector<GrayImage>& images) {
  SpectralStack s(images.at(0).width(), images.at(0).height());
  s.bands.push_back(Band("nir", 830, 830, BandKind::nir));
  for (std::size_t i = 0; i < images.size(); ++i) {
    s.lights.push_back(LightDirection(0, 0, 1));
    s.add({"nir", static_cast<int>(i), 0}, Capture{images[i], std::nullopt});
  }
  return s;
}

double oracle_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---- Homography ----------------------------------------------------------------------------

TEST(Homography, SimilarityInverseRoundTrips) {
  const auto H = Homography::similarity(3.0, -2.0, 0.2, 1.1, 40, 30);
  const auto p = (H.inverse() * H).apply(17.0, 23.0);
  EXPECT_NEAR(p.x, 17.0, 1e-9);
  EXPECT_NEAR(p.y, 23.0, 1e-9);
  EXPECT_NEAR(H.rotation_deg(), 0.2 * 180.0 / kPi, 1e-9);
}

TEST(Homography, AffineDropsPerspectiveRow) {
  Eigen::Matrix3d m;
  m << 1.0, 0.1, 2.0, -0.1, 1.0, 3.0, 1e-4, 2e-4, 1.0;
  const auto a = Homography(m).affine();
  EXPECT_EQ(a.m(2, 0), 0.0);
  EXPECT_EQ(a.m(2, 1), 0.0);
  EXPECT_EQ(a.m(2, 2), 1.0);
  EXPECT_EQ(a.m(0, 2), 2.0);
}

TEST(Homography, SingularMatrixRejected) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(2, 2) = 1.0;
  EXPECT_THROW(Homography{m}, ParameterError);
}

// ---- composite_image -----------------------------------------------------------------------

TEST(Composite, SingleLightIsThatImage) {
  const auto img = noise_image(16, 1);
  const auto c = composite_image(stack_from({img}), "nir");
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(c[i], img[i]);
}

TEST(Composite, ElevenUniformValuesGiveEightTenths) {
  std::vector<GrayImage> imgs;
  for (int k = 0; k <= 10; ++k) imgs.emplace_back(4, 4, static_cast<float>(k / 10.0));
  const auto c = composite_image(stack_from(imgs), "nir");
  for (float v : c) EXPECT_NEAR(v, 0.8, 1e-6);
}

TEST(Composite, ShadowedSampleNeverSelected) {
  const int n = 12, lights = 9;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.3, 0.9);
  std::vector<GrayImage> imgs(lights, GrayImage(n, n));
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int shadowed = (x + 3 * y) % lights;
      for (int l = 0; l < lights; ++l) imgs[static_cast<std::size_t>(l)](x, y) = l == shadowed ? 0.0f : static_cast<float>(u(rng));
    }
  const auto c = composite_image(stack_from(imgs), "nir");
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      std::vector<double> v;
      for (const auto& img : imgs) v.push_back(img(x, y));
      EXPECT_GE(c(x, y), 0.3f);
      EXPECT_NEAR(c(x, y), oracle_percentile(v, 0.8), 1e-6);
    }
}

TEST(Composite, UnknownBandThrows) {
  EXPECT_THROW(composite_image(stack_from({noise_image(4, 1)}), "vis"), ParameterError);
}

// ---- rsncc_cost ----------------------------------------------------------------------------

TEST(Rsncc, SelfMatchIsZero) {
  const auto img = BlobTexture(64, 2).render(64);
  const RsnccParams p;
  for (auto [x, y] : {std::pair{20, 20}, {32, 40}, {50, 12}}) EXPECT_NEAR(rsncc_cost(img, img, x, y, {}, p), 0.0, 1e-9);
}

TEST(Rsncc, ContrastReversalLeavesCostUnchanged) {
  const auto a = BlobTexture(64, 3).render(64);
  const auto b = BlobTexture(64, 4).render(64);
  GrayImage inv_a = a, inv_b = b;
  for (auto& v : inv_a) v = 1.0f - v;
  for (auto& v : inv_b) v = 1.0f - v;
  EXPECT_NEAR(rsncc_cost(a, inv_a, 30, 30, {}), 0.0, 1e-6);
  for (auto [x, y] : {std::pair{16, 16}, {30, 45}, {48, 20}})
    EXPECT_NEAR(rsncc_cost(a, b, x, y, {1.5, -0.5}), rsncc_cost(a, inv_b, x, y, {1.5, -0.5}), 1e-6);
}

TEST(Rsncc, AffineIntensityInvariance) {
  const auto a = BlobTexture(64, 5).render(64);
  const auto b = BlobTexture(64, 6).render(64);
  GrayImage b2 = b, a2 = a;
  for (auto& v : b2) v = 0.25f * v + 0.4f;
  for (auto& v : a2) v = 3.0f * v - 1.0f;
  for (auto [x, y] : {std::pair{16, 16}, {30, 45}, {48, 20}}) {
    const double e = rsncc_cost(a, b, x, y, {0.5, 0.25});
    EXPECT_NEAR(rsncc_cost(a, b2, x, y, {0.5, 0.25}), e, 1e-5);
    EXPECT_NEAR(rsncc_cost(a2, b, x, y, {0.5, 0.25}), e, 1e-5);
  }
}

TEST(Rsncc, RandomPatchesCostMoreThanMatched) {
  const auto a = noise_image(64, 7), b = noise_image(64, 8);
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> pos(6, 57);
  for (int t = 0; t < 200; ++t) {
    const int x = pos(rng), y = pos(rng);
    const double matched = rsncc_cost(a, a, x, y, {});
    EXPECT_GT(rsncc_cost(a, b, x, y, {}), matched + 0.1);
  }
}

TEST(Rsncc, ZeroVariancePatchCountsAsWorstCorrelation) {
  const GrayImage flat(32, 32, 0.5f);
  const auto tex = noise_image(32, 10);
  const RsnccParams p;
  const double worst = charbonnier(1.0, p.robust_eps) * (1.0 + p.tau);
  EXPECT_NEAR(rsncc_cost(flat, tex, 16, 16, {}, p), worst, 1e-12);
}

TEST(Rsncc, CostIsNonNegative) {
  const auto a = noise_image(32, 11), b = noise_image(32, 12);
  for (int y = 0; y < 32; y += 5)
    for (int x = 0; x < 32; x += 5) EXPECT_GE(rsncc_cost(a, b, x, y, {0.3, -0.7}), 0.0);
}

TEST(Rsncc, DenseMapMatchesSinglePixelInInterior) {
  const auto a = BlobTexture(48, 13).render(48);
  const auto b = noise_image(48, 14);
  const RsnccParams p;
  const auto m = rsncc_cost_map(a, b, p);
  for (int y = p.patch_radius + 1; y < 48 - p.patch_radius - 1; y += 3)
    for (int x = p.patch_radius + 1; x < 48 - p.patch_radius - 1; x += 3)
      EXPECT_NEAR(m(x, y), rsncc_cost(a, b, x, y, {}, p), 1e-6) << x << "," << y;
}

TEST(Rsncc, InvalidParamsRejected) {
  RsnccParams p;
  p.lambda1 = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = {};
  p.patch_radius = 0;
  EXPECT_THROW(p.validate(), ParameterError);
}

// ---- global_align --------------------------------------------------------------------------

constexpr int kN = 128;

TEST(GlobalAlign, SelfAlignmentIsIdentity) {
  const auto img = BlobTexture(kN, 21).render(kN);
  const auto r = global_align(img, img);
  EXPECT_LT((r.H.m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(GlobalAlign, RecoversTranslation) {
  const BlobTexture tex(kN, 22);
  const auto vis = tex.render(kN);
  // band(q) = vis(q - t), so band(p + t) = vis(p)
  const auto band = tex.render(kN, [](int x, int y) { return Vec2{x - 5.0, y + 3.0}; });
  const auto r = global_align(band, vis);
  const double c = 0.5 * (kN - 1);
  const Vec2 q = r.H.apply(c, c);
  EXPECT_NEAR(q.x - c, 5.0, 0.5);
  EXPECT_NEAR(q.y - c, -3.0, 0.5);
}

TEST(GlobalAlign, RecoversRotationUnderContrastInversion) {
  const BlobTexture tex(kN, 23);
  const auto vis = tex.render(kN);
  const double c = 0.5 * (kN - 1);
  const auto truth = Homography::similarity(0, 0, 2.0 * kPi / 180.0, 1.0, c, c);
  const auto inv = truth.inverse();
  GrayImage band = tex.render(kN, [&](int x, int y) { return inv.apply(x, y); });
  for (auto& v : band) v = 1.0f - v;
  const auto r = global_align(band, vis);
  EXPECT_NEAR(r.H.rotation_deg(), 2.0, 0.2);
}

TEST(GlobalAlign, UnrelatedImagesFailWithBestEffort) {
  const auto a = noise_image(kN, 24), b = noise_image(kN, 25);
  try {
    global_align(a, b);
    FAIL() << "expected AlignmentFailed";
  } catch (const AlignmentFailed& e) {
    EXPECT_GT(e.residual(), RsnccParams{}.max_mean_cost);
    EXPECT_TRUE(e.best().m.allFinite());
  }
}

// ---- local_align ---------------------------------------------------------------------------

double sinus_x(double y) { return 2.0 * std::sin(2.0 * kPi * y / 64.0); }
double sinus_y(double x) { return 2.0 * std::cos(2.0 * kPi * x / 64.0); }

TEST(LocalAlign, IdenticalImagesGiveNearZeroField) {
  for (unsigned seed : {31u, 32u, 33u}) {
    const auto img = BlobTexture(kN, seed).render(kN);
    const auto w = local_align(img, img, Homography::identity());
    double mx = 0.0;
    for (const auto& v : w) mx = std::max(mx, std::hypot(v.x, v.y));
    EXPECT_LT(mx, 0.1) << "seed " << seed;
  }
}

TEST(LocalAlign, RecoversSmoothSinusoidalWarp) {
  const BlobTexture tex(kN, 34);
  const auto vis = tex.render(kN);
  // band(q + d(q)) = vis(q): find q for each band pixel by fixed-point iteration.
  GrayImage band = tex.render(kN, [](int x, int y) {
    double qx = x, qy = y;
    for (int it = 0; it < 40; ++it) {
      const double nx = x - sinus_x(qy), ny = y - sinus_y(qx);
      qx = nx, qy = ny;
    }
    return Vec2{qx, qy};
  });
  for (auto& v : band) v = 1.0f - v;
  const auto w = local_align(band, vis, Homography::identity());
  double epe = 0.0;
  int count = 0;
  for (int y = 16; y < kN - 16; ++y)
    for (int x = 16; x < kN - 16; ++x) {
      epe += std::hypot(w(x, y).x - sinus_x(y), w(x, y).y - sinus_y(x));
      ++count;
    }
  EXPECT_LT(epe / count, 0.5);
}

TEST(LocalAlign, LargePairwiseWeightGivesConstantField) {
  const BlobTexture tex(kN, 35);
  const auto vis = tex.render(kN);
  const auto band = tex.render(kN, [](int x, int y) { return Vec2{x - sinus_x(y), y - sinus_y(x)}; });
  RsnccParams p;
  p.lambda2 = 1e4;
  const auto w = local_align(band, vis, Homography::identity(), p);
  double mx = 0, my = 0;
  for (const auto& v : w) mx += v.x, my += v.y;
  mx /= static_cast<double>(w.size()), my /= static_cast<double>(w.size());
  for (const auto& v : w) EXPECT_LT(std::hypot(v.x - mx, v.y - my), 0.01);
}

TEST(LocalAlign, FieldMatchesReferenceSize) {
  const auto a = BlobTexture(96, 36).render(96);
  const auto w = local_align(a, a, Homography::identity());
  EXPECT_EQ(w.width(), 96);
  EXPECT_EQ(w.height(), 96);
  for (const auto& v : w) EXPECT_TRUE(std::isfinite(v.x) && std::isfinite(v.y));
}

// ---- warp_normal_map -----------------------------------------------------------------------

NormalMap random_normals(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  NormalMap m(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.set(x, y, normalized({g(rng), g(rng), 1.0}));
  return m;
}

TEST(WarpNormals, IdentityIsBitExact) {
  const auto n = random_normals(32, 41);
  const auto out = warp_normal_map(n, Homography::identity());
  for (std::size_t i = 0; i < n.normals.size(); ++i) {
    EXPECT_EQ(out.normals[i], n.normals[i]);
    EXPECT_EQ(out.mask[i], n.mask[i]);
  }
}

TEST(WarpNormals, IntegerTranslationRelocatesVectors) {
  const int n = 32;
  const auto src = random_normals(n, 42);
  // H maps reference to band coordinates, so band pixel q lands on q + (3, 0).
  const auto out = warp_normal_map(src, Homography::translation(-3.0, 0.0));
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (x + 3 < n) {
        ASSERT_TRUE(out.valid(x + 3, y));
        EXPECT_EQ(out.normals(x + 3, y), src.normals(x, y));
      }
      if (x < 3) {
        EXPECT_FALSE(out.valid(x, y));
      }
    }
}

TEST(WarpNormals, RotationMovesPositionsNotVectors) {
  const int n = 128;
  const auto src = random_normals(n, 43);
  std::map<std::tuple<double, double, double>, int> pool;
  for (const auto& v : src.normals) pool[{v.x, v.y, v.z}]++;
  const double c = 0.5 * (n - 1);
  const auto H = Homography::similarity(0, 0, 10.0 * kPi / 180.0, 1.0, c, c);
  const auto out = warp_normal_map(src, H);
  int holes = 0, covered = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (out.valid(x, y)) {
        const auto& v = out.normals(x, y);
        EXPECT_TRUE(pool.count({v.x, v.y, v.z})) << "vector altered at " << x << "," << y;
      }
      const Vec2 q = H.apply(x, y);
      if (q.x < 1 || q.y < 1 || q.x > n - 2 || q.y > n - 2) continue;
      ++covered;
      holes += !out.valid(x, y);
    }
  EXPECT_LT(static_cast<double>(holes) / covered, 0.05);
}

TEST(WarpNormals, CollisionKeepsSmallerDisplacement) {
  const int n = 24;
  const auto src = random_normals(n, 44);
  // Scale 2 about the origin: band pixel q maps to q / 2, so four sources share a target.
  const auto H = Homography::similarity(0, 0, 0.0, 2.0, 0, 0);
  const auto out = warp_normal_map(src, H);
  std::map<std::pair<int, int>, std::pair<double, Vec3>> oracle;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int tx = static_cast<int>(std::lround(x / 2.0)), ty = static_cast<int>(std::lround(y / 2.0));
      const double d = std::hypot(tx - x, ty - y);
      auto it = oracle.find({tx, ty});
      if (it == oracle.end() || d < it->second.first) oracle[{tx, ty}] = {d, src.normals(x, y)};
    }
  for (const auto& [t, best] : oracle) {
    ASSERT_TRUE(out.valid(t.first, t.second));
    EXPECT_EQ(out.normals(t.first, t.second), best.second);
  }
}

TEST(WarpNormals, FieldShiftsBeforeRounding) {
  const int n = 16;
  const auto src = random_normals(n, 45);
  const DisplacementField f(n, n, Vec2{1.0, 0.0});
  const auto out = warp_normal_map(src, Homography::identity(), &f);
  for (int y = 0; y < n; ++y)
    for (int x = 1; x < n; ++x) EXPECT_EQ(out.normals(x - 1, y), src.normals(x, y));
  for (int y = 0; y < n; ++y) EXPECT_FALSE(out.valid(n - 1, y));
}

TEST(WarpNormals, HoleFillAveragesInSlopeSpace) {
  const int n = 9;
  NormalMap src(n, n);
  const Vec3 v = normalized({0.2, -0.1, 1.0});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (!(x == 4 && y == 4)) src.set(x, y, v);
  WarpOptions opt;
  const auto plain = warp_normal_map(src, Homography::identity(), nullptr, opt);
  EXPECT_FALSE(plain.valid(4, 4));
  opt.fill_holes = true;
  const auto filled = warp_normal_map(src, Homography::identity(), nullptr, opt);
  ASSERT_TRUE(filled.valid(4, 4));
  EXPECT_LT(angle_deg(filled.normals(4, 4), v), 1e-9);
}

TEST(WarpNormals, FieldSizeMismatchRejected) {
  const auto src = random_normals(8, 46);
  const DisplacementField f(4, 4);
  EXPECT_THROW(warp_normal_map(src, Homography::identity(), &f), StructuralError);
}

} // namespace
} // namespace spectra::registration
