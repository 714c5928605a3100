#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "gtex/geometry.hpp"

namespace fixture {

using gtex::Face;
using gtex::TemplateMesh;
using gtex::Vec2;
using gtex::Vec3;

// n x n vertex grid over [-half, half]^2 in z = 0, CCW from +z, UVs mapping the grid onto [0,1]^2.
inline TemplateMesh grid(int n, double half = 0.5) {
  TemplateMesh m;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / (n - 1), v = static_cast<double>(j) / (n - 1);
      m.vertices.emplace_back((2 * u - 1) * half, (2 * v - 1) * half, 0.0);
      m.uvs.emplace_back(u, v);
    }
  }
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i, b = a + 1, c = a + n, d = c + 1;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  }
  m.face_uvs = m.faces;
  return m;
}

inline std::mt19937_64& rng() {
  static std::mt19937_64 r(12345);
  return r;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

inline Vec3 random_vec3(double s) { return Vec3(uniform(-s, s), uniform(-s, s), uniform(-s, s)); }

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fixture
