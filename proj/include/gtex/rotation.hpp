#pragma once

#include "gtex/geometry.hpp"

namespace gtex {

/// Coefficients of R = I + a[w]x + b[w]x^2 for axis-angle w with angle phi = |w|,
/// a = sin(phi)/phi, b = (1-cos(phi))/phi^2, together with a'(phi)/phi and
/// b'(phi)/phi. Series expansions near zero keep all four smooth.
struct RodriguesCoeffs {
  double a;
  double b;
  double da_over_phi;
  double db_over_phi;
};

RodriguesCoeffs rodrigues_coeffs(double phi);

Mat3 axis_angle_matrix(const Vec3& w);

/// d(R(w) u) / dw, a 3x3 Jacobian. Well defined at w = 0 (equals -[u]x).
Mat3 rotate_jacobian(const Vec3& w, const Vec3& u);

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace gtex
