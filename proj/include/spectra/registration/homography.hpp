#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "spectra/core/error.hpp"
#include "spectra/core/vec.hpp"

namespace spectra::registration {

/// Planar projective map in pixel coordinates, normalized so m(2,2) = 1.
struct Homography {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  Homography() = default;
  explicit Homography(const Eigen::Matrix3d& h) : m(h) {
    if (std::abs(m(2, 2)) > 1e-15) m /= m(2, 2);
    if (!m.allFinite() || std::abs(m.determinant()) <= 1e-9)
      throw ParameterError("homography must be finite and invertible (|det| > 1e-9)");
  }

  static Homography identity() { return {}; }

  static Homography translation(double tx, double ty) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    h(0, 2) = tx;
    h(1, 2) = ty;
    return Homography(h);
  }

  /// Rotation by theta (radians) and uniform scale about (cx, cy), then translation.
  static Homography similarity(double tx, double ty, double theta, double scale, double cx,
                               double cy) {
    const double c = scale * std::cos(theta), s = scale * std::sin(theta);
    Eigen::Matrix3d h;
    h << c, -s, cx - c * cx + s * cy + tx, s, c, cy - s * cx - c * cy + ty, 0, 0, 1;
    return Homography(h);
  }

  Vec2 apply(double x, double y) const {
    const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
    return {(m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w, (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w};
  }

  Homography inverse() const { return Homography(m.inverse()); }

  /// H' with the perspective row replaced by (0, 0, 1).
  Homography affine() const {
    Eigen::Matrix3d a = m;
    a.row(2) << 0.0, 0.0, 1.0;
    return Homography(a);
  }

  Homography operator*(const Homography& o) const { return Homography(m * o.m); }

  /// Rotation angle of the linear part in degrees.
  double rotation_deg() const { return std::atan2(m(1, 0) - m(0, 1), m(0, 0) + m(1, 1)) * 180.0 / kPi; }
};

/// Thrown when alignment does not reach the cost threshold; carries the best estimate.
class AlignmentFailed : public Error {
public:
  AlignmentFailed(const std::string& what, Homography best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual) {}
  const Homography& best() const { return best_; }
  double residual() const { return residual_; }

private:
  Homography best_;
  double residual_;
};

} // namespace spectra::registration
