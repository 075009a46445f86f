#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "spectra/core/filter.hpp"
#include "spectra/registration/homography.hpp"
#include "spectra/registration/rsncc.hpp"

namespace spectra::registration {

using DisplacementField = Image<Vec2>;

struct GlobalAlignResult {
  /// Maps reference (visible) pixels to the matching position in the aligned band.
  Homography H;
  /// Mean RSNCC cost over the evaluated pixels at full resolution.
  double residual = 0.0;
};

namespace detail {

/// Coordinate change between a level and the next finer one under pixel-center sampling.
inline Homography level_change(double s) {
  Eigen::Matrix3d c = Eigen::Matrix3d::Identity();
  c(0, 0) = c(1, 1) = s;
  c(0, 2) = c(1, 2) = 0.5 * s - 0.5;
  return Homography(c);
}

/// Expresses a fine-level homography at a level scaled by s.
inline Homography rescale(const Homography& H, double s) {
  const Homography c = level_change(s);
  return c * H * c.inverse();
}

inline std::vector<GrayImage> build_levels(const GrayImage& img, const RsnccParams& p) {
  std::vector<GrayImage> out{img};
  while (static_cast<int>(out.size()) < p.pyramid_levels) {
    const GrayImage& last = out.back();
    const int next_short = static_cast<int>(std::lround(std::min(last.width(), last.height()) * p.pyramid_scale));
    if (next_short < p.min_level_size) break;
    out.push_back(downsample(last, p.pyramid_scale));
  }
  return out;
}

/// Evaluation window: the reference interior, inset by an eighth of each side.
struct CostEvaluator {
  const GrayImage& ref;
  const GrayImage& mov;
  const RsnccParams& params;
  int x0, y0, x1, y1;

  CostEvaluator(const GrayImage& r, const GrayImage& m, const RsnccParams& p)
      : ref(r), mov(m), params(p) {
    const int mx = std::max(p.patch_radius + 1, r.width() / 8);
    const int my = std::max(p.patch_radius + 1, r.height() / 8);
    x0 = mx, y0 = my, x1 = r.width() - mx, y1 = r.height() - my;
  }

  /// Per-pixel costs over the window; pixels mapping outside the moving frame are skipped.
  std::vector<double> costs(const Homography& H) const {
    Mask inside;
    const GrayImage j = warp_image(mov, H, ref.width(), ref.height(), nullptr, &inside);
    const Image<double> c = rsncc_cost_map(ref, j, params, &inside);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(x1 - x0) * static_cast<std::size_t>(y1 - y0));
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) out.push_back(c(x, y) >= 0.0 ? c(x, y) : 0.0);
    return out;
  }

  double mean(const Homography& H) const {
    const auto c = costs(H);
    double s = 0.0;
    for (double v : c) s += v;
    return c.empty() ? 0.0 : s / static_cast<double>(c.size());
  }
};

/// Normalized coordinates u = (x - c) / s keep the 8 parameters comparably scaled.
struct Normalizer {
  Homography t, t_inv;
  explicit Normalizer(const GrayImage& img) {
    const double s = 0.5 * std::max(img.width(), img.height());
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = m(1, 1) = 1.0 / s;
    m(0, 2) = -0.5 * (img.width() - 1) / s;
    m(1, 2) = -0.5 * (img.height() - 1) / s;
    t = Homography(m);
    t_inv = t.inverse();
  }
  Eigen::Matrix<double, 8, 1> params(const Homography& H) const {
    const Eigen::Matrix3d n = (t * H * t_inv).m;
    Eigen::Matrix<double, 8, 1> v;
    v << n(0, 0), n(0, 1), n(0, 2), n(1, 0), n(1, 1), n(1, 2), n(2, 0), n(2, 1);
    return v;
  }
  Homography homography(const Eigen::Matrix<double, 8, 1>& v) const {
    Eigen::Matrix3d n;
    n << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), 1.0;
    return t_inv * Homography(n) * t;
  }
};

/// Levenberg-Marquardt on residuals sqrt(E_p) with a central-difference Jacobian.
inline Homography refine(const CostEvaluator& ev, const Homography& start, int max_iterations) {
  const Normalizer nz(ev.ref);
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  auto residuals = [&](const Vec8& v, bool& ok) {
    ok = true;
    std::vector<double> c;
    try {
      c = ev.costs(nz.homography(v));
    } catch (const ParameterError&) {
      ok = false;
      return Eigen::VectorXd();
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) r(static_cast<Eigen::Index>(i)) = std::sqrt(c[i]);
    return r;
  };
  Vec8 v = nz.params(start);
  bool ok;
  Eigen::VectorXd r = residuals(v, ok);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  const double step = 1e-4;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd J(r.size(), 8);
    for (int k = 0; k < 8; ++k) {
      Vec8 a = v, b = v;
      a(k) += step;
      b(k) -= step;
      bool oka, okb;
      const Eigen::VectorXd ra = residuals(a, oka), rb = residuals(b, okb);
      if (!oka || !okb) return nz.homography(v);
      J.col(k) = (ra - rb) / (2.0 * step);
    }
    const Eigen::Matrix<double, 8, 8> JtJ = J.transpose() * J;
    const Vec8 g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 10 && !improved; ++tries) {
      Eigen::Matrix<double, 8, 8> A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      const Vec8 delta = A.ldlt().solve(-g);
      const Vec8 cand = v + delta;
      bool okc;
      const Eigen::VectorXd rc = residuals(cand, okc);
      if (okc && rc.squaredNorm() < cost) {
        v = cand;
        r = rc;
        const double rel = (cost - rc.squaredNorm()) / std::max(cost, 1e-30);
        cost = rc.squaredNorm();
        lambda = std::max(lambda * 0.3, 1e-9);
        improved = true;
        if (rel < 1e-7 || delta.norm() < 1e-8) return nz.homography(v);
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return nz.homography(v);
}

} // namespace detail

/// Estimates H with I_lambda(H p) ~ I_vis(p): exhaustive translation / rotation / scale
/// search on the coarsest level, then 8-DOF Levenberg-Marquardt refinement down the pyramid.
inline GlobalAlignResult global_align(const GrayImage& i_lambda, const GrayImage& i_vis,
                                      const RsnccParams& params = {}) {
  params.validate();
  const auto ref_levels = detail::build_levels(i_vis, params);
  const auto mov_levels = detail::build_levels(i_lambda, params);
  const std::size_t top = std::min(ref_levels.size(), mov_levels.size()) - 1;
  const double top_scale = std::pow(params.pyramid_scale, static_cast<double>(top));

  const GrayImage& rt = ref_levels[top];
  const detail::CostEvaluator coarse(rt, mov_levels[top], params);
  const double cx = 0.5 * (rt.width() - 1), cy = 0.5 * (rt.height() - 1);
  const double t_range = params.search_translation_px * top_scale;
  const int t_steps = std::max(1, static_cast<int>(std::ceil(t_range)));
  const double r_range = params.search_rotation_deg * kPi / 180.0;
  const int r_steps = std::max(1, static_cast<int>(std::ceil(params.search_rotation_deg / 2.0)));
  Homography best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (double s : {0.95, 1.0, 1.05})
    for (int ri = -r_steps; ri <= r_steps; ++ri)
      for (int ty = -t_steps; ty <= t_steps; ++ty)
        for (int tx = -t_steps; tx <= t_steps; ++tx) {
          const Homography H = Homography::similarity(tx * t_range / t_steps, ty * t_range / t_steps,
                                                      ri * r_range / r_steps, s, cx, cy);
          const double c = coarse.mean(H);
          if (c < best_cost) best_cost = c, best = H;
        }

  Homography H = best;
  for (std::size_t lvl = top + 1; lvl-- > 0;) {
    if (lvl != top) H = detail::rescale(H, 1.0 / params.pyramid_scale);
    const detail::CostEvaluator ev(ref_levels[lvl], mov_levels[lvl], params);
    H = detail::refine(ev, H, params.max_iterations);
  }
  const detail::CostEvaluator full(i_vis, i_lambda, params);
  GlobalAlignResult res{H, full.mean(H)};
  if (!(res.residual <= params.max_mean_cost))
    throw AlignmentFailed("global_align: mean RSNCC cost " + std::to_string(res.residual) +
                              " above threshold",
                          H, res.residual);
  return res;
}

namespace detail {

inline DisplacementField upsample_field(const DisplacementField& f, int w, int h, double scale) {
  DisplacementField out(w, h);
  GrayImage fx(f.width(), f.height()), fy(f.width(), f.height());
  for (std::size_t i = 0; i < f.size(); ++i) fx[i] = static_cast<float>(f[i].x), fy[i] = static_cast<float>(f[i].y);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sx = (x + 0.5) * scale - 0.5, sy = (y + 0.5) * scale - 0.5;
      out(x, y) = {sample_bilinear(fx, sx, sy) / scale, sample_bilinear(fy, sx, sy) / scale};
    }
  return out;
}

} // namespace detail

/// Residual per-pixel displacement after global alignment: I_lambda(H(p + w_p)) ~ I_vis(p).
///
/// Each level fits a quadratic to the RSNCC cost over the 3x3 integer offsets around the
/// current estimate, then runs iteratively reweighted Gauss-Seidel sweeps on the data term
/// plus lambda1 * psi(|grad w|^2) and lambda2 * sum |w_p - w_q| over 4-neighbors.
inline constexpr double kMinCurvature = 1e-3;
inline constexpr int kBacktracks = 3;
/// Offset of the cost probes used to fit the local quadratic, in pixels.
inline constexpr double kProbe = 0.25;
/// Reference window variance at which the data term carries half weight (std ~0.003).
inline constexpr double kFlatVariance = 1e-5;

inline DisplacementField local_align(const GrayImage& i_lambda, const GrayImage& i_vis,
                                     const Homography& H, const RsnccParams& params = {},
                                     int outer_iterations = 4, int sweeps = 10) {
  params.validate();
  const auto ref_levels = detail::build_levels(i_vis, params);
  const auto mov_levels = detail::build_levels(i_lambda, params);
  const std::size_t top = std::min(ref_levels.size(), mov_levels.size()) - 1;

  DisplacementField w;
  for (std::size_t lvl = top + 1; lvl-- > 0;) {
    const GrayImage& ref = ref_levels[lvl];
    const GrayImage& mov = mov_levels[lvl];
    const double s = std::pow(params.pyramid_scale, static_cast<double>(lvl));
    const Homography Hl = detail::rescale(H, s);
    const int W = ref.width(), Hh = ref.height();
    w = w.empty() ? DisplacementField(W, Hh, Vec2{}) : detail::upsample_field(w, W, Hh, params.pyramid_scale);

    // Data confidence from reference contrast alone, so it cannot favor any offset.
    Image<double> conf(W, Hh);
    {
      const detail::Integral n(W, Hh, [](int, int) { return 1.0; });
      const detail::Integral s1(W, Hh, [&](int x, int y) { return double(ref(x, y)); });
      const detail::Integral s2(W, Hh, [&](int x, int y) { return double(ref(x, y)) * ref(x, y); });
      const int r = params.patch_radius;
      for (int y = 0; y < Hh; ++y)
        for (int x = 0; x < W; ++x) {
          const double cnt = n.box(x - r, y - r, x + r, y + r);
          const double m = s1.box(x - r, y - r, x + r, y + r) / cnt;
          const double v = std::max(s2.box(x - r, y - r, x + r, y + r) / cnt - m * m, 0.0);
          conf(x, y) = v / (v + kFlatVariance);
        }
    }

    for (int outer = 0; outer < outer_iterations; ++outer) {
      // Quadratic model of the data cost around the current field.
      std::array<Image<double>, 9> c;
      for (int k = 0; k < 9; ++k) {
        const double ox = kProbe * (k % 3 - 1), oy = kProbe * (k / 3 - 1);
        DisplacementField shifted = w;
        for (auto& v : shifted) v.x += ox, v.y += oy;
        Mask inside;
        const GrayImage j = warp_image(mov, Hl, W, Hh, &shifted, &inside);
        c[static_cast<std::size_t>(k)] = rsncc_cost_map(ref, j, params, &inside);
      }
      Image<Eigen::Matrix2d> A(W, Hh);
      Image<Vec2> g(W, Hh);
      for (int y = 0; y < Hh; ++y)
        for (int x = 0; x < W; ++x) {
          auto at = [&](int ox, int oy) {
            const double v = c[static_cast<std::size_t>((oy + 1) * 3 + ox + 1)](x, y);
            if (v >= 0.0) return v;
            const double m = c[static_cast<std::size_t>((1 - oy) * 3 + 1 - ox)](x, y);
            return m >= 0.0 ? m : c[4](x, y);
          };
          if (c[4](x, y) < 0.0) {
            A(x, y) = kMinCurvature * Eigen::Matrix2d::Identity();
            g(x, y) = {};
            continue;
          }
          Eigen::Matrix2d a;
          a(0, 0) = at(1, 0) + at(-1, 0) - 2.0 * at(0, 0);
          a(1, 1) = at(0, 1) + at(0, -1) - 2.0 * at(0, 0);
          a(0, 1) = a(1, 0) = 0.25 * (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1));
          a *= conf(x, y) / (kProbe * kProbe);
          Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
          const Eigen::Matrix2d& V = es.eigenvectors();
          Eigen::Vector2d ev = es.eigenvalues();
          Eigen::Vector2d gv = conf(x, y) / (2.0 * kProbe) * V.transpose() *
                               Eigen::Vector2d(at(1, 0) - at(-1, 0), at(0, 1) - at(0, -1));
          // No data along directions the cost does not curve upward.
          for (int k = 0; k < 2; ++k)
            if (ev(k) < kMinCurvature) ev(k) = kMinCurvature, gv(k) = 0.0;
          A(x, y) = V * ev.asDiagonal() * V.transpose();
          const Eigen::Vector2d gg = V * gv;
          g(x, y) = {gg(0), gg(1)};
        }
      const DisplacementField w0 = w;
      for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int y = 0; y < Hh; ++y)
          for (int x = 0; x < W; ++x) {
            const Eigen::Matrix2d& a = A(x, y);
            const Eigen::Vector2d d0(w0(x, y).x, w0(x, y).y);
            Eigen::Matrix2d M = a;
            Eigen::Vector2d rhs = a * d0 - Eigen::Vector2d(g(x, y).x, g(x, y).y);
            const std::array<std::pair<int, int>, 4> nb{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
            for (const auto& [dx, dy] : nb) {
              const int xx = x + dx, yy = y + dy;
              if (!w.contains(xx, yy)) continue;
              const double ux = w(x, y).x - w(xx, yy).x, uy = w(x, y).y - w(xx, yy).y;
              const double d2 = ux * ux + uy * uy;
              const double psi_prime = 1.0 / std::sqrt(d2 + params.smooth_eps * params.smooth_eps);
              const double wt = params.lambda1 * psi_prime + params.lambda2 / std::max(std::sqrt(d2), params.smooth_eps);
              M(0, 0) += wt;
              M(1, 1) += wt;
              rhs += wt * Eigen::Vector2d(w(xx, yy).x, w(xx, yy).y);
            }
            Eigen::Vector2d nw = M.ldlt().solve(rhs);
            nw = d0 + (nw - d0).cwiseMax(-1.0).cwiseMin(1.0);
            w(x, y) = {nw(0), nw(1)};
          }
      }
      // Backtrack pixels whose true data cost rose under the step.
      for (int halving = 0; halving <= kBacktracks; ++halving) {
        Mask inside;
        const GrayImage j = warp_image(mov, Hl, W, Hh, &w, &inside);
        const Image<double> cn = rsncc_cost_map(ref, j, params, &inside);
        bool any = false;
        for (int y = 0; y < Hh; ++y)
          for (int x = 0; x < W; ++x) {
            const double before = c[4](x, y), after = cn(x, y);
            if (before < 0.0 || (after >= 0.0 && after <= before)) continue;
            any = true;
            const Vec2 o = w0(x, y);
            w(x, y) = halving == kBacktracks ? o : Vec2{0.5 * (w(x, y).x + o.x), 0.5 * (w(x, y).y + o.y)};
          }
        if (!any) break;
      }
    }
  }
  for (const auto& v : w)
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw AlignmentFailed("local_align: field diverged", H, std::numeric_limits<double>::infinity());
  return w;
}

} // namespace spectra::registration
