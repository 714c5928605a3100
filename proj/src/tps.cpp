#include "gtex/tps.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <fmt/core.h>

namespace gtex {

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

Vec2 TpsWarp::apply(const Vec2& p) const {
  Vec2 out = affine.leftCols<2>() * p + affine.col(2);
  for (std::size_t i = 0; i < control_src.size(); ++i) out += kernel_weights[i] * tps_kernel((p - control_src[i]).norm());
  return out;
}

double TpsWarp::bending_energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < control_src.size(); ++i) {
    for (std::size_t j = 0; j < control_src.size(); ++j) {
      e += tps_kernel((control_src[i] - control_src[j]).norm()) * kernel_weights[i].dot(kernel_weights[j]);
    }
  }
  return e;
}

TpsWarp tps_solve(std::span<const Vec2> src, std::span<const Vec2> dst, double lambda) {
  require(src.size() == dst.size(), "TPS control counts differ");
  require(lambda >= 0.0, "TPS regularization must be non-negative");
  const int n = static_cast<int>(src.size());
  if (n < 3) fail(ErrorKind::InvalidArgument, fmt::format("TPS needs at least 3 control points, got {}", n));

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) L(i, j) = tps_kernel((src[i] - src[j]).norm());
    L(i, i) += lambda;
    L(i, n) = L(n, i) = 1.0;
    L(i, n + 1) = L(n + 1, i) = src[i].x();
    L(i, n + 2) = L(n + 2, i) = src[i].y();
    rhs(i, 0) = dst[i].x();
    rhs(i, 1) = dst[i].y();
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  if (lu.rank() < n + 3) fail(ErrorKind::Numerical, "singular TPS system (collinear or duplicate control points)");
  const Eigen::MatrixXd sol = lu.solve(rhs);

  TpsWarp w;
  w.control_src.assign(src.begin(), src.end());
  w.control_dst.assign(dst.begin(), dst.end());
  w.lambda = lambda;
  w.kernel_weights.resize(n);
  for (int i = 0; i < n; ++i) w.kernel_weights[i] = Vec2(sol(i, 0), sol(i, 1));
  for (int c = 0; c < 2; ++c) {
    w.affine(c, 2) = sol(n, c);
    w.affine(c, 0) = sol(n + 1, c);
    w.affine(c, 1) = sol(n + 2, c);
  }
  return w;
}

std::vector<Vec2> tps_apply(const TpsWarp& warp, std::span<const Vec2> points) {
  std::vector<Vec2> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = warp.apply(points[i]);
  return out;
}

double sample_bilinear(const Image& image, const Vec2& pixel, int channel) {
  const double s = std::clamp(pixel.x() - 0.5, 0.0, image.width() - 1.0);
  const double t = std::clamp(pixel.y() - 0.5, 0.0, image.height() - 1.0);
  const int x0 = static_cast<int>(s), y0 = static_cast<int>(t);
  const int x1 = std::min(x0 + 1, image.width() - 1), y1 = std::min(y0 + 1, image.height() - 1);
  const double fx = s - x0, fy = t - y0;
  return (1 - fx) * (1 - fy) * image(x0, y0, channel) + fx * (1 - fy) * image(x1, y0, channel) +
         (1 - fx) * fy * image(x0, y1, channel) + fx * fy * image(x1, y1, channel);
}

TpsBake tps_bake_texture(const TemplateMesh& mesh, std::span<const Observation> views, int resolution,
                         double lambda) {
  require(!views.empty(), "TPS bake needs at least one view");
  const DomainMask domain = rasterize_uv_domain(mesh, resolution);
  const std::vector<View> fviews = face_views(mesh);

  TpsBake out{TextureMap(resolution, resolution, 3), Mask(resolution, resolution), 0};
  for (const Observation& obs : views) {
    obs.validate(mesh);
    std::vector<Vec2> src, dst;
    for (const auto& [name, pixel] : obs.landmarks) {
      Vec2 uv;
      if (!landmark_uv(mesh, fviews, mesh.landmarks.at(name), obs.camera.view, uv)) continue;
      src.push_back(uv);
      dst.push_back(pixel);
    }
    if (src.size() < 3) {
      fail(ErrorKind::BadInput, fmt::format("TPS bake needs at least 3 landmarks per view, got {}", src.size()));
    }
    out.landmark_count += static_cast<int>(src.size());
    const TpsWarp warp = tps_solve(src, dst, lambda);
    const int n = obs.camera.image_size;
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * resolution + x;
        const int f = domain.face[i];
        if (f < 0 || fviews[f] != obs.camera.view) continue;
        const Vec2 p = warp.apply(texel_center_uv(x, y, resolution));
        const bool on_image = p.x() >= 0.0 && p.y() >= 0.0 && p.x() < n && p.y() < n;
        const bool hit = on_image && obs.silhouette(static_cast<int>(p.x()), static_cast<int>(p.y())) >= 0.5;
        for (int c = 0; c < 3; ++c) out.texture(x, y, c) = hit ? sample_bilinear(obs.image, p, c) : 0.5;
        out.missing.set(x, y, !hit);
      }
    }
  }
  out.texture.clamp();
  return out;
}

}  // namespace gtex
