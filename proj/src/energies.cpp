#include "gtex/energies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {

PointEnergy e_lmk(std::span<const Vec2> projected, std::span<const Vec2> targets, int image_size) {
  if (projected.empty()) fail(ErrorKind::InvalidArgument, "landmark energy needs at least one landmark");
  require(projected.size() == targets.size(), "landmark count mismatch");
  require(image_size > 0, "image size must be positive");
  PointEnergy out;
  out.grad.assign(projected.size(), Vec2::Zero());
  const double scale = 1.0 / (image_size * static_cast<double>(projected.size()));
  for (std::size_t i = 0; i < projected.size(); ++i) {
    const Vec2 d = projected[i] - targets[i];
    const double len = d.norm();
    out.value += len * scale;
    if (len > 0.0) out.grad[i] = d * (scale / len);
  }
  return out;
}

ImageEnergy e_sil(const Image& rendered, const Image& target) {
  if (!rendered.same_shape(target) || rendered.channels() != 1) {
    fail(ErrorKind::InvalidArgument, fmt::format("silhouettes must be single-channel and equal in size ({}x{} vs {}x{})",
                                                 rendered.width(), rendered.height(), target.width(), target.height()));
  }
  const auto a = rendered.values();
  const auto b = target.values();
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] * b[i];
    uni += a[i] + b[i] - a[i] * b[i];
  }
  ImageEnergy out{0.0, Image(rendered.width(), rendered.height(), 1)};
  if (uni <= 0.0) return out;
  out.value = 1.0 - inter / uni;
  auto g = out.grad.values();
  const double inv = 1.0 / (uni * uni);
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = -(b[i] * uni - inter * (1.0 - b[i])) * inv;
  return out;
}

VertexEnergy e_norm(const TemplateMesh& mesh, std::span<const Vec3> vertices) {
  const auto pairs = adjacent_face_pairs(mesh);
  return e_norm(mesh, vertices, pairs);
}

VertexEnergy e_norm(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                    std::span<const std::pair<int, int>> pairs) {
  require(static_cast<int>(vertices.size()) == mesh.vertex_count(), "vertex count does not match the mesh");
  const int nf = mesh.face_count();
  std::vector<Vec3> cross(nf), normal(nf);
  std::vector<double> len(nf);
  for (int f = 0; f < nf; ++f) {
    const auto& [i, j, k] = mesh.faces[f];
    cross[f] = (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]);
    len[f] = cross[f].norm();
    if (!(len[f] > 0.0)) fail(ErrorKind::Numerical, fmt::format("face {} is degenerate", f));
    normal[f] = cross[f] / len[f];
  }

  VertexEnergy out;
  out.grad.assign(vertices.size(), Vec3::Zero());
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  std::vector<Vec3> gn(nf, Vec3::Zero());
  for (const auto& [fi, fj] : pairs) {
    out.value += (1.0 - normal[fi].dot(normal[fj])) * inv;
    gn[fi] -= normal[fj] * inv;
    gn[fj] -= normal[fi] * inv;
  }
  for (int f = 0; f < nf; ++f) {
    if (gn[f].isZero(0.0)) continue;
    // n = c/|c|: dL/dc = (I - n n^T) dL/dn / |c|; c = e1 x e2.
    const Vec3 gc = (gn[f] - normal[f] * normal[f].dot(gn[f])) / len[f];
    const auto& [i, j, k] = mesh.faces[f];
    const Vec3 e1 = vertices[j] - vertices[i];
    const Vec3 e2 = vertices[k] - vertices[i];
    const Vec3 g1 = e2.cross(gc);
    const Vec3 g2 = gc.cross(e1);
    out.grad[j] += g1;
    out.grad[k] += g2;
    out.grad[i] -= g1 + g2;
  }
  return out;
}

ImageEnergy e_tv(const Image& image, const Mask* mask) {
  const int w = image.width(), h = image.height(), nc = image.channels();
  if (mask) require(mask->width == w && mask->height == h, "TV mask size mismatch");
  ImageEnergy out{0.0, Image(w, h, nc)};
  auto g = out.grad.values();
  const auto v = image.values();
  auto axis = [&](int dx, int dy, double norm) {
    for (int y = 0; y + dy < h; ++y) {
      for (int x = 0; x + dx < w; ++x) {
        if (mask && !((*mask)(x, y) && (*mask)(x + dx, y + dy))) continue;
        const std::size_t a = image.index(x, y), b = image.index(x + dx, y + dy);
        double sq = 0.0;
        for (int c = 0; c < nc; ++c) sq += (v[b + c] - v[a + c]) * (v[b + c] - v[a + c]);
        if (sq == 0.0) continue;
        const double len = std::sqrt(sq);
        out.value += len * norm;
        for (int c = 0; c < nc; ++c) {
          const double d = (v[b + c] - v[a + c]) / len * norm;
          g[b + c] += d;
          g[a + c] -= d;
        }
      }
    }
  };
  if (w > 1) axis(1, 0, 1.0 / (static_cast<double>(h) * (w - 1)));
  if (h > 1) axis(0, 1, 1.0 / (static_cast<double>(h - 1) * w));
  return out;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {
  require(lr > 0.0, "learning rate must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), "optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double cosine_decay(double start, double end, int step, int steps) {
  if (steps <= 0) return end;
  const double t = std::clamp(static_cast<double>(step) / steps, 0.0, 1.0);
  return end + (start - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace gtex
