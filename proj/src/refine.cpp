#include "gtex/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

void check_resolution(int a, int b, const char* what) {
  if (a != b) fail(ErrorKind::InvalidArgument, fmt::format("{} resolution mismatch ({} vs {})", what, a, b));
}

}  // namespace

double ResidualMask::fraction(const DomainMask& domain) const {
  const std::size_t inside = domain.inside_count();
  return inside == 0 ? 0.0 : static_cast<double>(hole.count()) / static_cast<double>(inside);
}

ResidualMask residual_from_holes(const Mask& seed, const DomainMask& domain, int radius) {
  const int r = domain.resolution;
  check_resolution(seed.width, r, "hole mask");
  require(radius >= 0, "dilation radius must be non-negative");
  ResidualMask out{r, Mask(r, r), std::vector<double>(static_cast<std::size_t>(r) * r, 0.0)};
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      if (!domain(x, y)) continue;
      int best = std::numeric_limits<int>::max();
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= r || ny >= r) continue;
          if (seed(nx, ny) && domain(nx, ny)) best = std::min(best, std::max(std::abs(dx), std::abs(dy)));
        }
      }
      if (best > radius) continue;
      out.hole.set(x, y, true);
      out.feather[static_cast<std::size_t>(y) * r + x] = 1.0 - static_cast<double>(best) / (radius + 1);
    }
  }
  return out;
}

ResidualMask residual_mask(const CoverageMap& coverage, const DomainMask& domain, const RefineParams& params) {
  params.validate();
  check_resolution(coverage.resolution, domain.resolution, "coverage");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < coverage.weight.size(); ++i) {
    if (domain.inside.bits[i] && coverage.weight[i] > 0.0) {
      sum += coverage.weight[i];
      ++count;
    }
  }
  const double tau = count > 0 ? params.coverage_fraction * sum / count : std::numeric_limits<double>::infinity();
  Mask seed(domain.resolution, domain.resolution);
  for (std::size_t i = 0; i < coverage.weight.size(); ++i) {
    seed.bits[i] = domain.inside.bits[i] && coverage.weight[i] < tau;
  }
  return residual_from_holes(seed, domain, params.dilation);
}

TextureMap inpaint_ns(const TextureMap& texture, const ResidualMask& mask, const DomainMask& domain,
                      const RefineParams& params) {
  params.validate();
  const int r = domain.resolution;
  check_resolution(texture.width(), r, "texture");
  check_resolution(mask.resolution, r, "residual mask");
  require(texture.height() == r, "texture must be square");
  const int nc = texture.channels();
  const std::size_t n = static_cast<std::size_t>(r) * r;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.hole.bits[i] && !domain.inside.bits[i]) fail(ErrorKind::InvalidArgument, "hole escapes domain");
  }

  TextureMap out = texture;
  auto in_domain = [&](int x, int y) { return x >= 0 && y >= 0 && x < r && y < r && domain(x, y); };
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * r + x; };

  // Hole components (4-connected) and their boundary value ranges.
  std::vector<int> comp(n, -1);
  std::vector<std::pair<int, int>> stack;
  int ncomp = 0;
  std::vector<std::vector<double>> lo, hi;
  std::vector<bool> has_boundary;
  for (int y0 = 0; y0 < r; ++y0) {
    for (int x0 = 0; x0 < r; ++x0) {
      if (!mask.hole(x0, y0) || comp[idx(x0, y0)] >= 0) continue;
      lo.emplace_back(nc, std::numeric_limits<double>::infinity());
      hi.emplace_back(nc, -std::numeric_limits<double>::infinity());
      has_boundary.push_back(false);
      comp[idx(x0, y0)] = ncomp;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        for (int k = 0; k < 4; ++k) {
          const int nx = x + kDx[k], ny = y + kDy[k];
          if (!in_domain(nx, ny)) continue;
          if (mask.hole(nx, ny)) {
            if (comp[idx(nx, ny)] < 0) {
              comp[idx(nx, ny)] = ncomp;
              stack.push_back({nx, ny});
            }
          } else {
            has_boundary.back() = true;
            for (int c = 0; c < nc; ++c) {
              lo.back()[c] = std::min(lo.back()[c], texture(nx, ny, c));
              hi.back()[c] = std::max(hi.back()[c], texture(nx, ny, c));
            }
          }
        }
      }
      ++ncomp;
    }
  }

  // Onion-peel start: each pass fills hole texels that touch known texels
  // with the mean of those neighbours.
  std::vector<unsigned char> known(n);
  for (std::size_t i = 0; i < n; ++i) known[i] = domain.inside.bits[i] && !mask.hole.bits[i];
  std::vector<int> hole_list;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.hole.bits[i]) hole_list.push_back(static_cast<int>(i));
  }
  std::vector<int> pending = hole_list, next, filled;
  while (!pending.empty()) {
    next.clear();
    filled.clear();
    for (int i : pending) {
      const int x = i % r, y = i / r;
      int cnt = 0;
      std::vector<double> acc(nc, 0.0);
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        if (!in_domain(nx, ny) || !known[idx(nx, ny)]) continue;
        ++cnt;
        for (int c = 0; c < nc; ++c) acc[c] += out(nx, ny, c);
      }
      if (cnt == 0) {
        next.push_back(i);
        continue;
      }
      for (int c = 0; c < nc; ++c) out(x, y, c) = acc[c] / cnt;
      filled.push_back(i);
    }
    if (filled.empty()) {
      // Components without any known boundary: no data to propagate.
      for (int i : next) {
        for (int c = 0; c < nc; ++c) out(i % r, i / r, c) = 0.5;
      }
      break;
    }
    for (int i : filled) known[i] = 1;
    pending.swap(next);
  }

  // Explicit iterations, double-buffered. Stencils only touch domain texels,
  // so the domain border acts as a reflecting (Neumann) boundary.
  std::vector<double> lap(n, 0.0);
  TextureMap prev = out;
  const double alpha = params.ns_transport;
  const double dt = params.ns_step;
  for (int it = 0; it < params.ns_iterations; ++it) {
    prev = out;
    for (int c = 0; c < nc; ++c) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          if (!domain(x, y)) continue;
          double l = 0.0;
          for (int k = 0; k < 4; ++k) {
            const int nx = x + kDx[k], ny = y + kDy[k];
            if (in_domain(nx, ny)) l += prev(nx, ny, c) - prev(x, y, c);
          }
          lap[idx(x, y)] = l;
        }
      }
      for (int i : hole_list) {
        const int x = i % r, y = i / r;
        if (!has_boundary[comp[i]]) continue;
        auto diff = [&](int dx, int dy, const auto& f) {
          const bool p = in_domain(x + dx, y + dy), m = in_domain(x - dx, y - dy);
          if (p && m) return 0.5 * (f(x + dx, y + dy) - f(x - dx, y - dy));
          if (p) return f(x + dx, y + dy) - f(x, y);
          if (m) return f(x, y) - f(x - dx, y - dy);
          return 0.0;
        };
        auto value = [&](int xx, int yy) { return prev(xx, yy, c); };
        auto laplace = [&](int xx, int yy) { return lap[idx(xx, yy)]; };
        const double ix = diff(1, 0, value), iy = diff(0, 1, value);
        const double lx = diff(1, 0, laplace), ly = diff(0, 1, laplace);
        const double gnorm = std::sqrt(ix * ix + iy * iy + 1e-12);
        // Change of smoothness along the isophote direction (-I_y, I_x).
        const double transport = (-lx * iy + ly * ix) / gnorm;
        const double v = prev(x, y, c) + dt * (alpha * transport + (1.0 - alpha) * lap[i]);
        out(x, y, c) = std::clamp(v, lo[comp[i]][c], hi[comp[i]][c]);
      }
    }
  }
  return out;
}

Image bilateral(const Image& image, const RefineParams& params, const Mask* domain) {
  params.validate();
  const int w = image.width(), h = image.height(), nc = image.channels();
  if (domain) require(domain->width == w && domain->height == h, "bilateral domain size mismatch");
  const int rad = params.bilateral_window / 2;
  const double ks = -0.5 / (params.sigma_spatial * params.sigma_spatial);
  const double kr = -0.5 / (params.sigma_range * params.sigma_range);
  std::vector<double> spatial((2 * rad + 1) * (2 * rad + 1));
  for (int dy = -rad; dy <= rad; ++dy) {
    for (int dx = -rad; dx <= rad; ++dx) spatial[(dy + rad) * (2 * rad + 1) + dx + rad] = std::exp(ks * (dx * dx + dy * dy));
  }
  Image out = image;
  std::vector<double> acc(nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (domain && !(*domain)(x, y)) continue;
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      for (int dy = -rad; dy <= rad; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -rad; dx <= rad; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= w || (domain && !(*domain)(nx, ny))) continue;
          double d2 = 0.0;
          for (int c = 0; c < nc; ++c) {
            const double d = image(nx, ny, c) - image(x, y, c);
            d2 += d * d;
          }
          const double wgt = spatial[(dy + rad) * (2 * rad + 1) + dx + rad] * std::exp(kr * d2);
          total += wgt;
          for (int c = 0; c < nc; ++c) acc[c] += wgt * image(nx, ny, c);
        }
      }
      for (int c = 0; c < nc; ++c) out(x, y, c) = acc[c] / total;
    }
  }
  return out;
}

TextureMap refine_texture(const TextureMap& coarse, const TextureMap& inpainted, const ResidualMask& mask,
                          const DomainMask& domain, const RefineParams& params) {
  const int r = domain.resolution;
  check_resolution(coarse.width(), r, "coarse texture");
  check_resolution(inpainted.width(), r, "inpainted texture");
  check_resolution(mask.resolution, r, "residual mask");
  require(coarse.same_shape(inpainted), "texture shapes differ");
  TextureMap composite = coarse;
  const int nc = coarse.channels();
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      const double f = mask.feather[static_cast<std::size_t>(y) * r + x];
      for (int c = 0; c < nc; ++c) {
        composite(x, y, c) = domain(x, y) ? (1.0 - f) * coarse(x, y, c) + f * inpainted(x, y, c) : 0.0;
      }
    }
  }
  TextureMap out = bilateral(composite, params, &domain.inside);
  out.clamp();
  return out;
}

}  // namespace gtex
