#include <gtest/gtest.h>

#include <cmath>

#include "spectra/core/manifest.hpp"
#include "spectra/photometric/specular.hpp"
#include "spectra/synth/dataset.hpp"
#include "spectra/synth/render.hpp"
#include "spectra/synth/report.hpp"
#include "spectra/synth/scene.hpp"
#include "test_util.hpp"

namespace spectra::synth {
namespace {

const Band kVis("vis", 400, 700, BandKind::visible_combined);
const Band kNir("nir720", 720, 720, BandKind::nir);

TEST(Scene, ZeroGroovesGivesIdenticalLayers) {
  const auto s = gen_layered_sphere(20, {}, 1.0);
  EXPECT_EQ(s.gt_top.normals, s.gt_bottom.normals);
  EXPECT_EQ(s.gt_top.mask, s.gt_bottom.mask);
}

TEST(Scene, ZeroPaintGivesIdenticalLayers) {
  const auto s = gen_layered_sphere(32, GrooveSpec::rings(4, 32, 2.0, 1.0), 0.0);
  EXPECT_EQ(s.gt_top.normals, s.gt_bottom.normals);
}

TEST(Scene, GroovesDeviateOnlyOnRingLoci) {
  const auto grooves = GrooveSpec::rings(4, 40, 2.5, 1.5);
  const auto s = gen_layered_sphere(40, grooves, 2.0);
  int inside = 0, deviating = 0;
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) {
      if (!s.gt_top.valid(x, y)) continue;
      const double a = angle_deg(s.gt_top.normals(x, y), s.gt_bottom.normals(x, y));
      if (!s.groove_mask(x, y)) {
        EXPECT_LT(a, 1e-6);
      } else {
        ++inside;
        deviating += a > 1.0;
      }
    }
  EXPECT_GT(inside, 0);
  EXPECT_GT(deviating, inside / 2);
}

TEST(Scene, RejectsBadParameters) {
  EXPECT_THROW(gen_layered_sphere(10, {}, 0.0), ParameterError);
  GrooveSpec deep = GrooveSpec::rings(1, 20, 2.0, 25.0);
  EXPECT_THROW(gen_layered_sphere(20, deep, 0.0), ParameterError);
}

TEST(Scene, Rig37IsUnitAndAboveHorizon) {
  const auto rig = light_rig_37();
  ASSERT_EQ(rig.size(), 37u);
  for (const auto& l : rig) {
    EXPECT_NEAR(norm(l.vec()), 1.0, 1e-12);
    EXPECT_GT(l.z(), 0.5);
  }
}

TEST(Render, TauZeroMatchesForwardModelOverTop) {
  const auto s = gen_layered_sphere(20, GrooveSpec::rings(2, 20, 2.0, 1.0), 0.5);
  const auto lights = light_rig_37();
  RenderOptions o;
  o.exposures = {1.0};
  const auto st = render_synthetic_stack(s, lights, {{kVis, 0.0}}, o);
  const photometric::RadianceModel m(1, 1, o.albedo);
  for (int li : {0, 7, 30}) {
    const auto& img = st.image("vis", li);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double e = s.gt_top.mask[i] ? photometric::forward_radiance(m, s.gt_top.normals[i], lights[li]) : 0.0;
      EXPECT_FLOAT_EQ(img[i], static_cast<float>(e));
    }
  }
}

TEST(Render, TauOneBandsAreIdentical) {
  const auto s = gen_layered_sphere(20, GrooveSpec::rings(2, 20, 2.0, 1.0), 0.5);
  const auto st = render_synthetic_stack(s, light_rig_37(), {{kVis, 1.0}, {kNir, 1.0}});
  for (int li = 0; li < 37; ++li)
    for (int ev = 0; ev < 3; ++ev) EXPECT_EQ(st.image("vis", li, ev), st.image("nir720", li, ev));
}

TEST(Render, NoSpecularMakesSpecularFreeANoOp) {
  const auto s = gen_sphere(20);
  const auto lights = light_rig_37();
  const auto st = render_synthetic_stack(s, lights, {{kVis, 0.0}});
  const photometric::RadianceModel m(1, 1, RenderOptions{}.albedo);
  for (int li = 0; li < 37; ++li) {
    GrayImage so(s.width(), s.height(), 0.0f);
    for (std::size_t i = 0; i < so.size(); ++i)
      if (s.gt_top.mask[i]) so[i] = static_cast<float>(forward_radiance(m, s.gt_top.normals[i], lights[li]));
    const auto& sh = st.image("vis", li);
    EXPECT_EQ(photometric::specular_free(so, sh, 3), sh);
  }
}

TEST(Render, ExposuresScaleAndClip) {
  const auto s = gen_sphere(16);
  RenderOptions o;
  o.exposures = {0.5, 1.0, 4.0};
  const auto st = render_synthetic_stack(s, light_rig_37(), {{kVis, 0.0}}, o);
  const auto& e0 = st.image("vis", 0, 0);
  const auto& e1 = st.image("vis", 0, 1);
  const auto& e2 = st.image("vis", 0, 2);
  for (std::size_t i = 0; i < e0.size(); ++i) {
    EXPECT_FLOAT_EQ(e1[i], std::min(1.0f, 2.0f * e0[i]));
    EXPECT_FLOAT_EQ(e2[i], std::min(1.0f, 8.0f * e0[i]));
  }
}

TEST(AngularError, IdenticalMapsHaveZeroError) {
  const auto s = gen_sphere(20);
  const auto rep = angular_error(s.gt_top, s.gt_top);
  EXPECT_EQ(rep.mean, 0.0);
  EXPECT_EQ(rep.max, 0.0);
}

TEST(AngularError, GlobalRotationGivesThatAngle) {
  // Cylinder normals lie in the xz plane, so a rotation about y turns each by the full angle.
  NormalMap truth(24, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 24; ++x) {
      const double phi = (x - 11.5) / 13.0;
      truth.set(x, y, {std::sin(phi), 0.0, std::cos(phi)});
    }
  NormalMap rot = truth;
  const double a = 5.0 * kPi / 180.0;
  for (std::size_t i = 0; i < rot.normals.size(); ++i) {
    if (!rot.mask[i]) continue;
    const Vec3 n = rot.normals[i];
    rot.normals[i] = {n.x * std::cos(a) + n.z * std::sin(a), n.y, -n.x * std::sin(a) + n.z * std::cos(a)};
  }
  const auto rep = angular_error(rot, truth);
  EXPECT_NEAR(rep.mean, 5.0, 1e-3);
  EXPECT_NEAR(rep.median, 5.0, 1e-3);
}

TEST(AngularError, EmptyIntersectionThrows) {
  EXPECT_THROW(angular_error(NormalMap(4, 4), NormalMap(4, 4)), ParameterError);
}

TEST(AngularError, HeatMapEndpoints) {
  const Color3 blue = heat_color(0.0), red = heat_color(30.0);
  EXPECT_GT(blue[2], 0.4f);
  EXPECT_EQ(blue[0], 0.0f);
  EXPECT_GT(red[0], 0.4f);
  EXPECT_EQ(red[2], 0.0f);
}

TEST(Dataset, WrittenDatasetLoadsBack) {
  const auto dir = test::temp_dir("synth_ds");
  const auto s = gen_layered_sphere(16, GrooveSpec::rings(2, 16, 1.5, 1.0), 0.5);
  const std::vector<SynthBand> bands{{kVis, 0.0}, {kNir, 1.0}};
  const auto st = render_synthetic_stack(s, light_rig_37(), bands);
  write_dataset(dir, "sphere", st, s, bands);
  const auto loaded = load_dataset(dir / "manifest.json");
  EXPECT_EQ(loaded.captures().size(), st.captures().size());
  EXPECT_EQ(loaded.image("nir720", 5, 2), st.image("nir720", 5, 2));
  const auto m = read_manifest(dir / "manifest.json");
  const auto gt = pfm::read_normals(dir / m.extras["gt_bottom"].get<std::string>());
  EXPECT_EQ(gt.mask, s.gt_bottom.mask);
  EXPECT_DOUBLE_EQ(m.extras["tau"]["nir720"].get<double>(), 1.0);
}

} // namespace
} // namespace spectra::synth
