#include "gtex/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, 2 * kRadius + 1> gaussian_window() {
  std::array<double, 2 * kRadius + 1> g{};
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) sum += g[i + kRadius] = std::exp(-0.5 * i * i / (1.5 * 1.5));
  for (double& v : g) v /= sum;
  return g;
}

void check_pair(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::InvalidArgument, fmt::format("image size mismatch ({}x{}x{} vs {}x{}x{})", a.width(), a.height(),
                                                 a.channels(), b.width(), b.height(), b.channels()));
  }
}

// Valid-region separable filtering of one channel; output indexed like the input.
std::vector<double> filter(const std::vector<double>& src, int w, int h) {
  static const auto g = gaussian_window();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = kRadius; x < w - kRadius; ++x) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) s += g[k + kRadius] * src[y * w + x + k];
      tmp[y * w + x] = s;
    }
  }
  for (int y = kRadius; y < h - kRadius; ++y) {
    for (int x = kRadius; x < w - kRadius; ++x) {
      double s = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) s += g[k + kRadius] * tmp[(y + k) * w + x];
      out[y * w + x] = s;
    }
  }
  return out;
}

}  // namespace

Image ssim_map(const Image& a, const Image& b) {
  check_pair(a, b);
  const int w = a.width(), h = a.height(), nc = a.channels();
  if (w < 2 * kRadius + 1 || h < 2 * kRadius + 1) {
    fail(ErrorKind::InvalidArgument, fmt::format("SSIM needs images of at least 11x11, got {}x{}", w, h));
  }
  Image map(w, h, 1);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < nc; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.values()[i * nc + c];
      y[i] = b.values()[i * nc + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x, w, h), my = filter(y, w, h);
    const auto sxx = filter(xx, w, h), syy = filter(yy, w, h), sxy = filter(xy, w, h);
    for (int py = kRadius; py < h - kRadius; ++py) {
      for (int px = kRadius; px < w - kRadius; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * w + px;
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cxy = sxy[i] - mx[i] * my[i];
        const double s = ((2 * mx[i] * my[i] + kC1) * (2 * cxy + kC2)) /
                         ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
        map.values()[i] += s / nc;
      }
    }
  }
  return map;
}

double ssim(const Image& a, const Image& b) {
  const Image map = ssim_map(a, b);
  double sum = 0.0;
  for (int y = kRadius; y < map.height() - kRadius; ++y) {
    for (int x = kRadius; x < map.width() - kRadius; ++x) sum += map(x, y);
  }
  return sum / (static_cast<double>(map.width() - 2 * kRadius) * (map.height() - 2 * kRadius));
}

double ssim_masked(const Image& a, const Image& b, const Mask& mask) {
  require(mask.width == a.width() && mask.height == a.height(), "SSIM mask size mismatch");
  const Image map = ssim_map(a, b);
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = kRadius; y < map.height() - kRadius; ++y) {
    for (int x = kRadius; x < map.width() - kRadius; ++x) {
      if (!mask(x, y)) continue;
      sum += map(x, y);
      ++count;
    }
  }
  return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

namespace {

double psnr_from(double sq, std::size_t count) {
  if (count == 0 || sq == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(count) / sq);
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_pair(a, b);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return psnr_from(sq, a.size());
}

double psnr_masked(const Image& a, const Image& b, const Mask& mask) {
  check_pair(a, b);
  require(mask.width == a.width() && mask.height == a.height(), "PSNR mask size mismatch");
  const int nc = a.channels();
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    if (!mask.bits[p]) continue;
    for (int c = 0; c < nc; ++c) {
      const double d = a.values()[p * nc + c] - b.values()[p * nc + c];
      sq += d * d;
      ++count;
    }
  }
  return psnr_from(sq, count);
}

}  // namespace gtex
