#include <algorithm>
#include <cmath>

#include "gtex/error.hpp"
#include "gtex/render.hpp"

namespace gtex {
namespace {

// Contributions with |x| beyond this on the outside are below exp(-20).
constexpr double kCutoff = 20.0;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct EdgeHit {
  double d2;
  int edge;   // closest edge runs from corner `edge` to corner (edge+1)%3
  double t;   // parameter of the closest point on it
  Vec2 r;     // pixel minus closest point
};

// Signed-distance query of a pixel centre against a projected triangle.
struct TriangleQuery {
  std::array<Vec2, 3> p;
  double area2;
  std::array<Vec2, 3> e;
  std::array<double, 3> inv_len2;

  explicit TriangleQuery(const std::array<Vec2, 3>& pts) : p(pts) {
    area2 = cross2(p[1] - p[0], p[2] - p[0]);
    for (int i = 0; i < 3; ++i) {
      e[i] = p[(i + 1) % 3] - p[i];
      const double l2 = e[i].squaredNorm();
      inv_len2[i] = l2 > 0.0 ? 1.0 / l2 : 0.0;
    }
  }

  bool inside(const Vec2& q) const {
    if (area2 == 0.0) return false;
    const double w0 = cross2(e[0], q - p[0]);
    const double w1 = cross2(e[1], q - p[1]);
    const double w2 = cross2(e[2], q - p[2]);
    return area2 > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
  }

  EdgeHit nearest(const Vec2& q) const {
    EdgeHit best{std::numeric_limits<double>::infinity(), 0, 0.0, Vec2::Zero()};
    for (int i = 0; i < 3; ++i) {
      const double t = std::clamp((q - p[i]).dot(e[i]) * inv_len2[i], 0.0, 1.0);
      const Vec2 r = q - (p[i] + t * e[i]);
      const double d2 = r.squaredNorm();
      if (d2 < best.d2) best = {d2, i, t, r};
    }
    return best;
  }
};

struct PixelBox {
  int x0, x1, y0, y1;
};

// Pixels whose centres lie within `margin` pixels of the triangle's bounding box.
PixelBox pixel_box(const std::array<Vec2, 3>& p, double margin, int size) {
  const double lx = std::min({p[0].x(), p[1].x(), p[2].x()}) - margin;
  const double hx = std::max({p[0].x(), p[1].x(), p[2].x()}) + margin;
  const double ly = std::min({p[0].y(), p[1].y(), p[2].y()}) - margin;
  const double hy = std::max({p[0].y(), p[1].y(), p[2].y()}) + margin;
  auto lo = [&](double v) { return std::max(0, static_cast<int>(std::ceil(v - 0.5))); };
  auto hi = [&](double v) { return std::min(size - 1, static_cast<int>(std::floor(v - 0.5))); };
  if (!std::isfinite(lx) || !std::isfinite(hx) || !std::isfinite(ly) || !std::isfinite(hy)) return {0, -1, 0, -1};
  if (hx < -1.0 || lx > size + 1.0 || hy < -1.0 || ly > size + 1.0) return {0, -1, 0, -1};
  return {lo(lx), hi(hx), lo(ly), hi(hy)};
}

struct Setup {
  double k;       // d_pixel^2 -> d_ndc^2 / sigma
  double margin;  // pixels
};

Setup setup(const Camera& camera, double sigma) {
  camera.validate();
  require(sigma > 0.0, "rasterizer sigma must be positive");
  const double ndc_per_pixel = 2.0 / camera.image_size;
  const double k = ndc_per_pixel * ndc_per_pixel / sigma;
  return {k, std::sqrt(kCutoff / k) + 1.0};
}

std::array<Vec2, 3> projected_face(const std::vector<Vec2>& proj, const Face& f) {
  return {proj[f[0]], proj[f[1]], proj[f[2]]};
}

}  // namespace

SoftSilhouette render_silhouette(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera,
                                 double sigma) {
  const Setup s = setup(camera, sigma);
  const int n = camera.image_size;
  const std::vector<Vec2> proj = project(camera, vertices);

  SoftSilhouette out;
  out.log_transmit.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (const Face& f : faces) {
    const auto pts = projected_face(proj, f);
    const TriangleQuery tri(pts);
    const PixelBox box = pixel_box(pts, s.margin, n);
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        const Vec2 q(x + 0.5, y + 0.5);
        const bool in = tri.inside(q);
        const double z = tri.nearest(q).d2 * s.k;
        if (!in && z > kCutoff) continue;
        out.log_transmit[static_cast<std::size_t>(y) * n + x] -= softplus(in ? z : -z);
      }
    }
  }
  out.image = Image(n, n, 1);
  for (std::size_t i = 0; i < out.log_transmit.size(); ++i) out.image.values()[i] = -std::expm1(out.log_transmit[i]);
  return out;
}

std::vector<Vec3> render_silhouette_backward(std::span<const Vec3> vertices, std::span<const Face> faces,
                                             const Camera& camera, double sigma, const SoftSilhouette& forward,
                                             const Image& grad) {
  const Setup s = setup(camera, sigma);
  const int n = camera.image_size;
  require(grad.width() == n && grad.height() == n && grad.channels() == 1, "silhouette gradient has the wrong shape");
  require(forward.log_transmit.size() == static_cast<std::size_t>(n) * n, "forward pass does not match the camera");
  const std::vector<Vec2> proj = project(camera, vertices);

  std::vector<Vec2> g2(vertices.size(), Vec2::Zero());
  for (const Face& f : faces) {
    const auto pts = projected_face(proj, f);
    const TriangleQuery tri(pts);
    const PixelBox box = pixel_box(pts, s.margin, n);
    std::array<Vec2, 3> acc{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * n + x;
        const double gp = grad.values()[idx];
        if (gp == 0.0) continue;
        const Vec2 q(x + 0.5, y + 0.5);
        const bool in = tri.inside(q);
        const EdgeHit hit = tri.nearest(q);
        const double z = hit.d2 * s.k;
        if (!in && z > kCutoff) continue;
        const double xs = in ? z : -z;
        // dS/dD_j = prod_{i != j}(1 - D_i), dD/dx = D(1 - D).
        const double others = std::exp(forward.log_transmit[idx] + softplus(xs));
        const double dldx = gp * others * sigmoid(xs) * sigmoid(-xs);
        const double dld2 = dldx * (in ? s.k : -s.k);
        const int a = hit.edge;
        const int b = (hit.edge + 1) % 3;
        acc[a] += dld2 * (-2.0 * (1.0 - hit.t)) * hit.r;
        acc[b] += dld2 * (-2.0 * hit.t) * hit.r;
      }
    }
    for (int c = 0; c < 3; ++c) g2[f[c]] += acc[c];
  }

  std::vector<Vec3> out(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    out[i] = Vec3(g2[i].x() * camera.scale_x(), g2[i].y() * camera.scale_y(), 0.0);
  }
  return out;
}

}  // namespace gtex
