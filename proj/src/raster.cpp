#include <algorithm>
#include <cmath>
#include <limits>

#include "gtex/error.hpp"
#include "gtex/render.hpp"

namespace gtex {

Fragments rasterize(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera) {
  camera.validate();
  const int n = camera.image_size;
  const std::size_t pixels = static_cast<std::size_t>(n) * n;
  Fragments frag;
  frag.size = n;
  frag.face.assign(pixels, -1);
  frag.bary.assign(pixels, Vec3::Zero());
  std::vector<double> zbuf(pixels, -std::numeric_limits<double>::infinity());
  const std::vector<Vec2> proj = project(camera, vertices);

  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    const Vec2 &a = proj[f[0]], &b = proj[f[1]], &c = proj[f[2]];
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (area == 0.0 || !std::isfinite(area)) continue;
    const double lx = std::min({a.x(), b.x(), c.x()}), hx = std::max({a.x(), b.x(), c.x()});
    const double ly = std::min({a.y(), b.y(), c.y()}), hy = std::max({a.y(), b.y(), c.y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(lx - 0.5)));
    const int x1 = std::min(n - 1, static_cast<int>(std::floor(hx - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ly - 0.5)));
    const int y1 = std::min(n - 1, static_cast<int>(std::floor(hy - 0.5)));
    const double za = camera.depth(vertices[f[0]]), zb = camera.depth(vertices[f[1]]), zc = camera.depth(vertices[f[2]]);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 q(x + 0.5, y + 0.5);
        // Barycentrics from sub-triangle areas; inclusive edges.
        const double wa = ((b - q).x() * (c - q).y() - (b - q).y() * (c - q).x()) / area;
        const double wb = ((c - q).x() * (a - q).y() - (c - q).y() * (a - q).x()) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
        const double z = wa * za + wb * zb + wc * zc;
        const std::size_t idx = static_cast<std::size_t>(y) * n + x;
        if (z > zbuf[idx]) {
          zbuf[idx] = z;
          frag.face[idx] = static_cast<int>(fi);
          frag.bary[idx] = Vec3(wa, wb, wc);
        }
      }
    }
  }
  return frag;
}

Image hard_silhouette(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera) {
  const Fragments frag = rasterize(vertices, faces, camera);
  Image out(frag.size, frag.size, 1);
  for (std::size_t i = 0; i < frag.face.size(); ++i) out.values()[i] = frag.covered(i) ? 1.0 : 0.0;
  return out;
}

void bilinear_taps(const Vec2& uv, int resolution, std::array<SamplingOperator::Tap, 4>& taps) {
  const double hi = resolution - 1;
  const double s = std::clamp(uv.x() * resolution - 0.5, 0.0, hi);
  const double t = std::clamp((1.0 - uv.y()) * resolution - 0.5, 0.0, hi);
  const int x0 = std::min(static_cast<int>(s), resolution - 1);
  const int y0 = std::min(static_cast<int>(t), resolution - 1);
  const int x1 = std::min(x0 + 1, resolution - 1);
  const int y1 = std::min(y0 + 1, resolution - 1);
  const double fx = s - x0, fy = t - y0;
  taps[0] = {y0 * resolution + x0, (1 - fx) * (1 - fy)};
  taps[1] = {y0 * resolution + x1, fx * (1 - fy)};
  taps[2] = {y1 * resolution + x0, (1 - fx) * fy};
  taps[3] = {y1 * resolution + x1, fx * fy};
}

SamplingOperator::SamplingOperator(const TemplateMesh& mesh, const Fragments& fragments, int texture_resolution)
    : image_size_(fragments.size), resolution_(texture_resolution) {
  require(texture_resolution >= 1, "texture resolution must be positive");
  const std::size_t pixels = fragments.face.size();
  start_.assign(pixels + 1, 0);
  taps_.reserve(pixels);
  std::array<Tap, 4> taps{};
  for (std::size_t p = 0; p < pixels; ++p) {
    start_[p] = static_cast<int>(taps_.size());
    const int f = fragments.face[p];
    if (f < 0) continue;
    const Vec3& w = fragments.bary[p];
    const Vec2 uv = w[0] * mesh.corner_uv(f, 0) + w[1] * mesh.corner_uv(f, 1) + w[2] * mesh.corner_uv(f, 2);
    bilinear_taps(uv, resolution_, taps);
    for (const Tap& t : taps) {
      if (t.weight > 0.0) taps_.push_back(t);
    }
    // Keep every covered pixel non-empty even when the sample lands exactly on a texel.
    if (static_cast<int>(taps_.size()) == start_[p]) taps_.push_back({taps[0].texel, 0.0});
  }
  start_[pixels] = static_cast<int>(taps_.size());
}

Image SamplingOperator::apply(const TextureMap& texture) const {
  require(texture.width() == resolution_ && texture.height() == resolution_ && texture.channels() == 3,
          "texture does not match the sampling operator");
  Image out(image_size_, image_size_, 3);
  const auto tex = texture.values();
  auto img = out.values();
  const int pixels = image_size_ * image_size_;
  for (int p = 0; p < pixels; ++p) {
    for (const Tap& t : taps(p)) {
      for (int c = 0; c < 3; ++c) img[3 * p + c] += t.weight * tex[3 * t.texel + c];
    }
  }
  return out;
}

TextureMap SamplingOperator::adjoint(const Image& image) const {
  require(image.width() == image_size_ && image.height() == image_size_ && image.channels() == 3,
          "image does not match the sampling operator");
  TextureMap out(resolution_, resolution_, 3);
  auto tex = out.values();
  const auto img = image.values();
  const int pixels = image_size_ * image_size_;
  for (int p = 0; p < pixels; ++p) {
    for (const Tap& t : taps(p)) {
      for (int c = 0; c < 3; ++c) tex[3 * t.texel + c] += t.weight * img[3 * p + c];
    }
  }
  return out;
}

Image render_textured(const TemplateMesh& mesh, std::span<const Vec3> vertices, const TextureMap& texture,
                      const Camera& camera) {
  require_texture(texture);
  const Fragments frag = rasterize(vertices, mesh.faces, camera);
  return SamplingOperator(mesh, frag, texture.width()).apply(texture);
}

Mask CoverageMap::observed() const {
  Mask m(resolution, resolution);
  for (std::size_t i = 0; i < weight.size(); ++i) m.bits[i] = weight[i] > 0.0;
  return m;
}

CoverageMap texel_coverage(const TemplateMesh& mesh, std::span<const Vec3> vertices, std::span<const Camera> cameras,
                           int resolution) {
  const DomainMask domain = rasterize_uv_domain(mesh, resolution);
  CoverageMap cov{resolution, std::vector<double>(static_cast<std::size_t>(resolution) * resolution, 0.0)};
  for (const Camera& cam : cameras) {
    const SamplingOperator op(mesh, rasterize(vertices, mesh.faces, cam), resolution);
    for (int p = 0; p < cam.image_size * cam.image_size; ++p) {
      for (const auto& t : op.taps(p)) cov.weight[t.texel] += t.weight;
    }
  }
  for (std::size_t i = 0; i < cov.weight.size(); ++i) {
    if (!domain.inside.bits[i]) cov.weight[i] = 0.0;
  }
  return cov;
}

}  // namespace gtex
