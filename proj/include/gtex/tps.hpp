#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gtex/fit.hpp"

namespace gtex {

/// U(r) = r^2 log r, U(0) = 0.
double tps_kernel(double r);

/// 2D thin-plate spline f(p) = affine [p; 1] + sum_i w_i U(|p - src_i|).
struct TpsWarp {
  std::vector<Vec2> control_src;
  std::vector<Vec2> control_dst;
  Eigen::Matrix<double, 2, 3> affine = Eigen::Matrix<double, 2, 3>::Zero();
  std::vector<Vec2> kernel_weights;
  double lambda = 0.0;

  Vec2 apply(const Vec2& p) const;
  /// trace(W^T K W) over both output coordinates.
  double bending_energy() const;
};

/// Solves the TPS system with lambda added to the kernel diagonal. Throws
/// Numerical for collinear or duplicate controls.
TpsWarp tps_solve(std::span<const Vec2> src, std::span<const Vec2> dst, double lambda = 1e-6);
std::vector<Vec2> tps_apply(const TpsWarp& warp, std::span<const Vec2> points);

struct TpsBake {
  TextureMap texture;
  /// Domain texels whose warped location falls outside the view's silhouette.
  Mask missing;
  int landmark_count = 0;
};

/// Warps each view's UV chart onto its image through a TPS fitted on the
/// landmarks, then samples the image bilinearly. Missing texels are mid-gray,
/// texels outside the UV domain are 0.
TpsBake tps_bake_texture(const TemplateMesh& mesh, std::span<const Observation> views, int resolution,
                         double lambda = 1e-6);

/// Bilinear sample at continuous pixel coordinates (pixel centres at +0.5), clamped at the border.
double sample_bilinear(const Image& image, const Vec2& pixel, int channel);

}  // namespace gtex
