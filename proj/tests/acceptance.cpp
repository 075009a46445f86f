// Acceptance checks on synthetic data. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "spectra/core/pyramid.hpp"
#include "spectra/enhancement/contrast.hpp"
#include "spectra/enhancement/curvature.hpp"
#include "spectra/mlic/mlic.hpp"
#include "spectra/photometric/highlight.hpp"
#include "spectra/photometric/normals.hpp"
#include "spectra/registration/align.hpp"
#include "spectra/registration/warp.hpp"
#include "spectra/service/render.hpp"
#include "spectra/shading/lines.hpp"
#include "spectra/shading/sbs.hpp"
#include "spectra/synth/preset.hpp"
#include "spectra/synth/render.hpp"
#include "spectra/synth/report.hpp"
#include "spectra/synth/scene.hpp"

namespace {

using namespace spectra;
namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

NormalMap random_normals(int w, int h, std::mt19937& rng, double spread, double hole_rate) {
  std::normal_distribution<double> g(0.0, spread);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NormalMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec3 n = normalized({g(rng), g(rng), 1.0});
      if (u(rng) >= hole_rate) m.set(x, y, n);
    }
  return m;
}

NormalMap sphere_map(int n, double r) {
  NormalMap m(n, n);
  const double c = 0.5 * (n - 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dx = x - c, dy = y - c, rr = dx * dx + dy * dy;
      if (rr >= 0.95 * r * r) continue;
      m.set(x, y, normalized({dx, dy, std::sqrt(r * r - rr)}));
    }
  return m;
}

// ---- Photometric round-trip ----------------------------------------------------------------

Outcome photometric_round_trip() {
  const auto scene = synth::gen_sphere(128);
  const auto lights = synth::light_rig_37();
  const photometric::RadianceModel model(1.0, 1.0, 0.7);
  std::vector<GrayImage> images;
  for (const auto& l : lights) {
    GrayImage img(scene.width(), scene.height(), 0.0f);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (scene.gt_top.mask[i])
        img[i] = static_cast<float>(photometric::forward_radiance(model, scene.gt_top.normals[i], l));
    images.push_back(std::move(img));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto n = photometric::solve_normals(images, lights);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double err = synth::angular_error(n, scene.gt_top).mean;
  return {err < 0.1 && secs < 10.0, fmt("mean %.4f deg (< 0.1), solve %.2f s (< 10)", err, secs)};
}

// ---- Layered recovery ----------------------------------------------------------------------

Outcome layered_recovery() {
  const auto scene = synth::layered_sphere_scene();
  const auto stack = synth::render_synthetic_stack(scene, synth::light_rig_37(), synth::layered_sphere_bands());
  const auto vis = photometric::solve_normals(stack, "vis");
  const auto nir = photometric::solve_normals(stack, "nir850");
  const Mask& g = scene.groove_mask;
  const double nir_bottom = synth::angular_error(nir, scene.gt_bottom, &g).mean;
  const double nir_top = synth::angular_error(nir, scene.gt_top, &g).mean;
  const double vis_top = synth::angular_error(vis, scene.gt_top, &g).mean;
  const double vis_bottom = synth::angular_error(vis, scene.gt_bottom, &g).mean;
  const bool ok = nir_bottom < 0.5 && nir_top > 5.0 && vis_top < 0.5 && vis_bottom > 5.0;
  return {ok, fmt("groove px: nir->bottom %.3f deg (< 0.5), nir->top %.2f (> 5); vis->top %.3f (< 0.5), "
                  "vis->bottom %.2f (> 5)",
                  nir_bottom, nir_top, vis_top, vis_bottom)};
}

// ---- Highlight removal ---------------------------------------------------------------------

Outcome highlight_removal() {
  const auto scene = synth::gen_sphere(64);
  synth::RenderOptions o;
  o.albedo = 0.2;
  o.specular_strength = 0.5;
  o.shininess = 30;
  o.exposures = {0.25, 0.5, 1.0};
  const auto stack = synth::render_synthetic_stack(
      scene, synth::light_rig_37(), {{Band("vis", 400, 700, BandKind::visible_combined), 0.0}}, o);
  const double plain = synth::angular_error(photometric::solve_normals(stack, "vis"), scene.gt_top).mean;
  photometric::HighlightParams p;
  p.th_ev = 0.13;
  p.use_coherence = true;
  p.use_specular_free = true;
  const double cleaned = synth::angular_error(photometric::remove_highlights(stack, "vis", p).normals, scene.gt_top).mean;
  return {plain > 3.0 && cleaned < 1.0, fmt("without %.2f deg (> 3), with %.3f deg (< 1)", plain, cleaned)};
}

// ---- Registration --------------------------------------------------------------------------

struct BlobTexture {
  struct Blob {
    double x, y, s, a;
  };
  std::vector<Blob> blobs;

  BlobTexture(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 60; ++k) blobs.push_back({u(rng) * n, u(rng) * n, 2.0 + 6.0 * u(rng), u(rng) - 0.3});
  }

  double operator()(double x, double y) const {
    double v = 0.0;
    for (const auto& b : blobs) v += b.a * std::exp(-((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (2.0 * b.s * b.s));
    return v;
  }

  GrayImage render(int n, const std::function<Vec2(int, int)>& source_of) const {
    GrayImage img(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const Vec2 q = source_of(x, y);
        img(x, y) = static_cast<float>((*this)(q.x, q.y));
      }
    return img;
  }
};

Outcome registration_recovery() {
  using registration::Homography;
  const int n = 128;
  const double c = 0.5 * (n - 1);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ut(-10.0, 10.0), ur(-5.0, 5.0);
  double worst_px = 0.0, worst_deg = 0.0;
  int failures = 0;
  const int trials = 6;
  for (int t = 0; t < trials; ++t) {
    const BlobTexture tex(n, 100 + static_cast<unsigned>(t));
    const double tx = ut(rng), ty = ut(rng), th = ur(rng);
    const auto truth = Homography::similarity(tx, ty, th * kPi / 180.0, 1.0, c, c);
    const auto inv = truth.inverse();
    const auto vis = tex.render(n, [](int x, int y) { return Vec2{double(x), double(y)}; });
    GrayImage band = tex.render(n, [&](int x, int y) { return inv.apply(x, y); });
    for (auto& v : band) v = 1.0f - v;
    try {
      const auto H = registration::global_align(band, vis).H;
      for (int y = 16; y < n - 16; y += 8)
        for (int x = 16; x < n - 16; x += 8) {
          const Vec2 a = H.apply(x, y), b = truth.apply(x, y);
          worst_px = std::max(worst_px, std::hypot(a.x - b.x, a.y - b.y));
        }
      worst_deg = std::max(worst_deg, std::abs(H.rotation_deg() - truth.rotation_deg()));
    } catch (const registration::AlignmentFailed&) {
      ++failures;
    }
  }

  // warp_normal_map may only move vectors; every output vector must come from the input.
  const auto src = random_normals(n, n, rng, 0.4, 0.0);
  std::map<std::tuple<double, double, double>, int> pool;
  for (const auto& v : src.normals) pool[{v.x, v.y, v.z}]++;
  int altered = 0, checked = 0;
  for (int t = 0; t < 4; ++t) {
    const auto H = Homography::similarity(ut(rng), ut(rng), ur(rng) * kPi / 180.0, 1.0, c, c);
    const auto out = registration::warp_normal_map(src, H);
    for (std::size_t i = 0; i < out.normals.size(); ++i) {
      if (!out.mask[i]) continue;
      ++checked;
      const auto& v = out.normals[i];
      altered += !pool.count({v.x, v.y, v.z});
    }
  }
  const bool ok = failures == 0 && worst_px <= 0.5 && worst_deg <= 0.2 && altered == 0 && checked > 0;
  return {ok, fmt("%d warps: max position error %.3f px (<= 0.5), max rotation error %.4f deg (<= 0.2), "
                  "%d failed; warp_normal_map altered %d of %d vectors (0)",
                  trials, worst_px, worst_deg, failures, altered, checked)};
}

// ---- Enhancement one-sidedness -------------------------------------------------------------

double brute_michelson(const GrayImage& img, const Mask& mask, int x, int y, int r) {
  double lo = 1e300, hi = -1e300;
  for (int yy = y - r; yy <= y + r; ++yy)
    for (int xx = x - r; xx <= x + r; ++xx) {
      if (!img.contains(xx, yy) || !mask(xx, yy)) continue;
      lo = std::min<double>(lo, img(xx, yy));
      hi = std::max<double>(hi, img(xx, yy));
    }
  return hi + lo > 0.0 ? (hi - lo) / (hi + lo) : 0.0;
}

GrayImage brute_chi(const NormalMap& n, const Vec3& l) {
  GrayImage chi(n.width(), n.height(), 0.0f);
  for (std::size_t i = 0; i < chi.size(); ++i)
    if (n.mask[i]) {
      const Vec3& v = n.normals[i];
      chi[i] = static_cast<float>(std::clamp(v.x * l.x + v.y * l.y + v.z * l.z, 0.0, 1.0));
    }
  return chi;
}

Outcome one_sidedness() {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int trials = 10000;
  long violations = 0, out_of_range = 0, positive = 0, constrained = 0;
  for (int t = 0; t < trials; ++t) {
    const int w = 6 + static_cast<int>(u(rng) * 6), h = 6 + static_cast<int>(u(rng) * 6);
    const int r = 1 + static_cast<int>(u(rng) * 3);
    const double th = 0.3 * u(rng);
    const auto vis = random_normals(w, h, rng, 0.1 + 0.6 * u(rng), 0.1 * u(rng));
    const auto nir = random_normals(w, h, rng, 0.1 + 0.6 * u(rng), 0.1 * u(rng));
    const auto nir2 = random_normals(w, h, rng, 0.1 + 0.6 * u(rng), 0.1 * u(rng));
    const double az = 2.0 * kPi * u(rng), el = (10.0 + 80.0 * u(rng)) * kPi / 180.0;
    const auto l = LightDirection::from_angles(az, el);

    const auto C = enhancement::dynamic_enhancement(vis, nir, l, r, th).C;
    const auto cv = brute_chi(vis, l.vec()), cn = brute_chi(nir, l.vec());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float c = C(x, y);
        out_of_range += !(c >= 0.0f && c <= 1.0f);
        positive += c > 0.0f;
        if (!vis.valid(x, y) || !nir.valid(x, y)) {
          violations += c != 0.0f;
          continue;
        }
        const double mv = brute_michelson(cv, vis.mask, x, y, r), mn = brute_michelson(cn, nir.mask, x, y, r);
        if (mn <= mv) {
          ++constrained;
          violations += c != 0.0f;
        }
      }

    const auto kv = enhancement::curvature_maps(vis), kn = enhancement::curvature_maps(nir),
               kn2 = enhancement::curvature_maps(nir2);
    const double kth = 0.05 * u(rng);
    const std::vector<enhancement::CurvatureMaps> kb{kn, kn2};
    const std::vector<NormalMap> nb{nir, nir2};
    for (const GrayImage& m : {enhancement::static_enhancement(kv, kn, kth).C,
                               enhancement::multiband_static(kv, kb, kth).map.C,
                               enhancement::multiband_dynamic(vis, nb, l, r, th).map.C})
      for (float c : m) out_of_range += !(c >= 0.0f && c <= 1.0f);
  }
  return {violations == 0 && out_of_range == 0 && positive > 0,
          fmt("%d random pairs: %ld nonzero C where m_nir <= m_vis (0) over %ld pixels, %ld weights outside "
              "[0,1] (0), %ld positive",
              trials, violations, constrained, out_of_range, positive)};
}

// ---- Shading composition -------------------------------------------------------------------

double laplacian_energy(const GrayImage& img, const Mask& mask) {
  double e = 0.0;
  for (int y = 1; y + 1 < img.height(); ++y)
    for (int x = 1; x + 1 < img.width(); ++x) {
      if (!mask(x, y) || !mask(x - 1, y) || !mask(x + 1, y) || !mask(x, y - 1) || !mask(x, y + 1)) continue;
      const double l = 4.0 * img(x, y) - img(x - 1, y) - img(x + 1, y) - img(x, y - 1) - img(x, y + 1);
      e += l * l;
    }
  return e;
}

Outcome shading_composition() {
  int not_mid = 0;
  const auto mid = shading::sbs_compose({Image<double>(16, 16, 0.0)}, {1.0});
  for (float v : mid) not_mid += v != 0.5f;

  const auto scene = synth::layered_sphere_scene();
  auto vis = scene.gt_top, nir = scene.gt_bottom;
  vis.band = Band("vis", 400, 700, BandKind::visible_combined);
  nir.band = Band("nir850", 800, 900, BandKind::nir);
  const auto pyr = build_pyramid({vis, nir}, RgbImage{}, PyramidParams{4, 2, 2.0, 1e-3});
  shading::SbsParams p;
  const auto res = shading::spectral_band_shading(pyr, p);
  p.f = -1.0;
  const double sharp = laplacian_energy(shading::sbs_render(pyr, res.levels, p), vis.mask);
  p.f = 1.0;
  const double smooth = laplacian_energy(shading::sbs_render(pyr, res.levels, p), vis.mask);
  return {not_mid == 0 && sharp > smooth,
          fmt("zero detail: %d of %zu pixels differ from 0.5 (0); Laplacian energy f=-1 %.4g > f=+1 %.4g", not_mid,
              mid.size(), sharp, smooth)};
}

// ---- Curvature -----------------------------------------------------------------------------

Outcome curvature_analytics() {
  const int n = 96;
  const double r = 40.0, c = 0.5 * (n - 1);
  const auto ks = enhancement::curvature_maps(sphere_map(n, r));
  double sphere_rel = 0.0;
  int sphere_px = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (std::hypot(x - c, y - c) > 0.7 * r) continue;
      ++sphere_px;
      if (!ks.mask(x, y)) {
        sphere_rel = 1e9;
        continue;
      }
      sphere_rel = std::max({sphere_rel, std::abs(ks.k1(x, y) * r - 1.0), std::abs(ks.k2(x, y) * r - 1.0)});
    }

  const double rc = 30.0;
  const int cw = 80, ch = 40;
  NormalMap cyl(cw, ch);
  const double ccx = 0.5 * (cw - 1);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x) {
      const double dx = x - ccx;
      if (std::abs(dx) < 0.9 * rc) cyl.set(x, y, normalized({dx, 0.0, std::sqrt(rc * rc - dx * dx)}));
    }
  const auto kc = enhancement::curvature_maps(cyl);
  double dir_deg = 0.0;
  for (int y = 2; y < ch - 2; ++y)
    for (int x = 0; x < cw; ++x) {
      if (std::abs(x - ccx) > 0.7 * rc) continue;
      if (!kc.mask(x, y)) {
        dir_deg = 1e9;
        continue;
      }
      const double axis = std::acos(std::min(1.0, std::abs(kc.dir2(x, y).y))) * 180.0 / kPi;
      const double across = std::acos(std::min(1.0, std::abs(kc.dir1(x, y).x))) * 180.0 / kPi;
      dir_deg = std::max({dir_deg, axis, across});
    }

  NormalMap plane(24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) plane.set(x, y, normalized({0.2, -0.1, 1.0}));
  const auto kp = enhancement::curvature_maps(plane);
  int nonzero = 0;
  for (std::size_t i = 0; i < kp.mask.size(); ++i)
    if (kp.mask[i]) nonzero += kp.k1[i] != 0.0 || kp.k2[i] != 0.0;

  return {sphere_rel <= 0.1 && dir_deg <= 5.0 && nonzero == 0,
          fmt("sphere max |kR - 1| %.4f over %d px (<= 0.1); cylinder max direction error %.3f deg (<= 5); "
              "plane nonzero %d (0)",
              sphere_rel, sphere_px, dir_deg, nonzero)};
}

// ---- Line extraction -----------------------------------------------------------------------

Outcome line_extraction() {
  const int w = 96, h = 32;
  const double period = 32.0, amp = 6.0;
  NormalMap n(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double zx = -amp * 2.0 * kPi / period * std::sin(2.0 * kPi * x / period);
      n.set(x, y, normalized({-zx, 0.0, 1.0}));
    }
  shading::LineParams p;
  p.mean_radius = 3;
  p.neighborhood = 7;
  p.darker_fraction = 0.80;
  const auto marks = shading::suggestive_contours(n, p);
  // n . v = 1 / sqrt(1 + z_x^2) is smallest where |sin| = 1, at odd quarter periods.
  int total = 0, near = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!marks(x, y)) continue;
      ++total;
      const double q = x / (period / 4.0);
      const double k = 2.0 * std::floor(0.5 * (q - 1.0) + 0.5) + 1.0;
      near += std::abs(x - k * period / 4.0) <= 1.0;
    }
  const double frac = total ? static_cast<double>(near) / total : 0.0;
  return {total > 0 && frac >= 0.95, fmt("%d of %d marks within 1 px of the analytic minimum (%.1f%%, >= 95%%)",
                                         near, total, 100.0 * frac)};
}

// ---- MLIC ----------------------------------------------------------------------------------

double stddev(const Image<double>& img) {
  double s = 0.0, s2 = 0.0;
  for (double v : img) s += v, s2 += v * v;
  const double n = static_cast<double>(img.size());
  return std::sqrt(std::max(s2 / n - (s / n) * (s / n), 0.0));
}

Outcome mlic_reduction() {
  synth::LayeredSpherePreset preset;
  preset.radius_px = 32;
  const auto stack = synth::render_synthetic_stack(synth::layered_sphere_scene(preset), synth::light_rig_37(),
                                                   synth::layered_sphere_bands());
  auto s = mlic::mlic_stack_from(stack);
  s.y_bis.assign(s.yuv.size(), GrayImage(stack.width(), stack.height(), 0.0f));
  mlic::MlicParams p;
  const auto ours = mlic::mlic(s, p);
  p.traditional = true;
  const auto base = mlic::mlic(s, p);
  const bool same = ours.image.size() == base.image.size() &&
                    std::memcmp(ours.image.pixels().data(), base.image.pixels().data(),
                                ours.image.size() * sizeof(Color3)) == 0 &&
                    std::memcmp(ours.Y.pixels().data(), base.Y.pixels().data(), ours.Y.size() * sizeof(double)) == 0;
  s.y_bis.clear();
  mlic::MlicParams q;
  q.beta = 0.5;
  const auto y_lo = mlic::mlic(s, q).Y;
  q.beta = 1.0;
  const auto y_hi = mlic::mlic(s, q).Y;
  const double lo = stddev(y_lo), hi = stddev(y_hi);
  auto log_of = [](const Image<double>& y) {
    Image<double> out(y.width(), y.height());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = std::log(y[k]);
    return out;
  };
  return {same && hi > lo,
          fmt("zero bispectral luminance %s traditional; std(Y) beta=1.0 %.4f > beta=0.5 %.4f "
              "(std(ln Y): %.3f vs %.3f)",
              same ? "bit-identical to" : "DIFFERS from", hi, lo, stddev(log_of(y_hi)), stddev(log_of(y_lo)))};
}

// ---- Determinism ---------------------------------------------------------------------------

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("spectra_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  synth::LayeredSpherePreset preset;
  preset.radius_px = 24;
  synth::write_layered_sphere(root / "sphere", preset);
  service::DatasetRegistry cached(root), uncached(root, false);
  const std::vector<nlohmann::json> requests{
      {{"mode", "sbs"}, {"params", {{"levels", 3}, {"f", -0.5}}}},
      {{"mode", "sbs"}, {"params", {{"levels", 2}, {"layered_color", true}}}},
      {{"mode", "curvature"}, {"params", {{"levels", 2}}}},
      {{"mode", "lines"}, {"params", {{"kind", "suggestive"}}}},
      {{"mode", "toon"}, {"params", {{"k", 3}}}},
      {{"mode", "mlic"}, {"params", {{"scales", 3}}}},
      {{"mode", "lambertian"}},
  };
  int mismatches = 0;
  for (auto body : requests) {
    body["dataset"] = "sphere";
    body["format"] = "png";
    const auto req = service::parse_render_request(body);
    const auto a = service::render(cached, req).bytes;
    const auto b = service::render(cached, req).bytes;
    const auto c = service::render(uncached, req).bytes;
    const auto d = service::render(uncached, req).bytes;
    mismatches += !(a == b && a == c && a == d && !a.empty());
  }
  fs::remove_all(root);
  return {mismatches == 0, fmt("%d of %zu modes differ across repeated renders with cache on and off (0)", mismatches,
                               requests.size())};
}

} // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"photometric round-trip", photometric_round_trip},
      {"layered recovery", layered_recovery},
      {"highlight removal", highlight_removal},
      {"registration", registration_recovery},
      {"enhancement one-sidedness", one_sidedness},
      {"shading composition", shading_composition},
      {"curvature analytics", curvature_analytics},
      {"line extraction", line_extraction},
      {"mlic reduction", mlic_reduction},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
