#include "gtex/procedural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

using Rng = std::mt19937_64;
using Color = std::array<double, 3>;

double uniform(Rng& rng, double lo, double hi) {
  // Explicit mapping keeps the stream identical across standard libraries.
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }

Color random_color(Rng& rng) { return {uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95)}; }

// Two colours at least 0.5 apart in some channel.
std::pair<Color, Color> contrasting(Rng& rng) {
  for (;;) {
    const Color a = random_color(rng), b = random_color(rng);
    double spread = 0.0;
    for (int c = 0; c < 3; ++c) spread = std::max(spread, std::abs(a[c] - b[c]));
    if (spread >= 0.5) return {a, b};
  }
}

Color mix(const Color& a, const Color& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

void fill(TextureMap& tex, const auto& f) {
  const int r = tex.width();
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      const Color col = f((x + 0.5) / r, (y + 0.5) / r);
      for (int c = 0; c < 3; ++c) tex(x, y, c) = col[c];
    }
  }
}

void stripes(TextureMap& tex, Rng& rng, int count) {
  const auto [a, b] = contrasting(rng);
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double duty = uniform(rng, 0.3, 0.7);
  fill(tex, [&](double u, double v) {
    const double t = (u * dx + v * dy) * count;
    return t - std::floor(t) < duty ? a : b;
  });
}

void checker(TextureMap& tex, Rng& rng, int cells) {
  const auto [a, b] = contrasting(rng);
  fill(tex, [&](double u, double v) {
    const int cx = static_cast<int>(u * cells), cy = static_cast<int>(v * cells);
    return (cx + cy) % 2 == 0 ? a : b;
  });
}

void gradient(TextureMap& tex, Rng& rng) {
  const auto [a, b] = contrasting(rng);
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double lo = std::min(0.0, dx) + std::min(0.0, dy), hi = std::max(0.0, dx) + std::max(0.0, dy);
  fill(tex, [&](double u, double v) { return mix(a, b, (u * dx + v * dy - lo) / (hi - lo)); });
}

void blobs(TextureMap& tex, Rng& rng, int count, bool keep_background) {
  const auto [base, first] = contrasting(rng);
  struct Blob {
    double x, y, r;
    Color col;
  };
  std::vector<Blob> list;
  for (int i = 0; i < count; ++i) {
    list.push_back({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.04, 0.12),
                    i == 0 ? first : random_color(rng)});
  }
  const int r = tex.width();
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      const double u = (x + 0.5) / r, v = (y + 0.5) / r;
      Color col = keep_background ? Color{tex(x, y, 0), tex(x, y, 1), tex(x, y, 2)} : base;
      for (const Blob& b : list) {
        const double d2 = (u - b.x) * (u - b.x) + (v - b.y) * (v - b.y);
        col = mix(col, b.col, std::exp(-0.5 * d2 / (b.r * b.r)));
      }
      for (int c = 0; c < 3; ++c) tex(x, y, c) = col[c];
    }
  }
}

}  // namespace

Recipe parse_recipe(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  Recipe r;
  if (name == "stripes") r.kind = RecipeKind::Stripes;
  else if (name == "checker") r.kind = RecipeKind::Checker;
  else if (name == "gradient") r.kind = RecipeKind::Gradient;
  else if (name == "blobs") r.kind = RecipeKind::Blobs;
  else if (name == "mixed") r.kind = RecipeKind::Mixed;
  else fail(ErrorKind::InvalidArgument, fmt::format("unknown texture recipe '{}'", name));
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      r.param = std::stoi(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1 || r.param < 1) throw std::invalid_argument("param");
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, fmt::format("bad recipe parameter in '{}'", text));
    }
  }
  return r;
}

std::string to_string(const Recipe& recipe) {
  static const char* names[] = {"stripes", "checker", "gradient", "blobs", "mixed"};
  const std::string name = names[static_cast<int>(recipe.kind)];
  return recipe.param > 0 ? fmt::format("{}:{}", name, recipe.param) : name;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TextureMap gen_texture(const Recipe& recipe, int resolution, std::uint64_t seed, const DomainMask* domain) {
  require(resolution >= 1, "texture resolution must be positive");
  if (domain) require(domain->resolution == resolution, "domain resolution does not match the texture");
  Rng rng(seed);
  TextureMap tex(resolution, resolution, 3);
  RecipeKind kind = recipe.kind;
  int param = recipe.param;
  switch (kind) {
    case RecipeKind::Stripes:
      stripes(tex, rng, param > 0 ? param : uniform_int(rng, 4, 9));
      break;
    case RecipeKind::Checker:
      checker(tex, rng, param > 0 ? param : uniform_int(rng, 4, 8));
      break;
    case RecipeKind::Gradient:
      gradient(tex, rng);
      break;
    case RecipeKind::Blobs:
      blobs(tex, rng, param > 0 ? param : uniform_int(rng, 6, 14), false);
      break;
    case RecipeKind::Mixed:
      gradient(tex, rng);
      blobs(tex, rng, param > 0 ? param : uniform_int(rng, 4, 10), true);
      break;
  }
  tex.clamp();
  if (domain) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        if (!(*domain)(x, y)) {
          for (int c = 0; c < 3; ++c) tex(x, y, c) = 0.0;
        }
      }
    }
  }
  return tex;
}

}  // namespace gtex
