#include "gtex/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Geometry>
#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

}  // namespace

void TemplateMesh::validate() const {
  const int n = vertex_count();
  if (faces.empty()) fail(ErrorKind::BadInput, "mesh has no faces");
  if (face_uvs.size() != faces.size()) fail(ErrorKind::BadInput, "every face needs UV indices");
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= n) {
        fail(ErrorKind::BadInput, fmt::format("face {} references vertex {} of {}", f, faces[f][k], n));
      }
      if (face_uvs[f][k] < 0 || face_uvs[f][k] >= static_cast<int>(uvs.size())) {
        fail(ErrorKind::BadInput, fmt::format("face {} references missing uv {}", f, face_uvs[f][k]));
      }
    }
    const Vec3& a = vertices[faces[f][0]];
    const Vec3 cross = (vertices[faces[f][1]] - a).cross(vertices[faces[f][2]] - a);
    if (!(cross.norm() > 0.0)) fail(ErrorKind::BadInput, fmt::format("face {} is degenerate", f));
  }
  for (std::size_t i = 0; i < uvs.size(); ++i) {
    const Vec2& uv = uvs[i];
    if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
      fail(ErrorKind::BadInput, fmt::format("uv {} = ({}, {}) outside [0,1]", i, uv.x(), uv.y()));
    }
  }
  std::unordered_map<std::uint64_t, int> incidence;
  incidence.reserve(faces.size() * 2);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces[f][k];
      const int b = faces[f][(k + 1) % 3];
      if (++incidence[edge_key(a, b)] > 2) {
        fail(ErrorKind::BadInput, fmt::format("edge ({}, {}) has more than two incident faces", a, b));
      }
    }
  }
  for (const auto& [name, index] : landmarks) {
    if (index < 0 || index >= n) {
      fail(ErrorKind::BadInput, fmt::format("landmark '{}' index {} out of range", name, index));
    }
  }
}

std::vector<Vec3> face_normals(const TemplateMesh& mesh, std::span<const Vec3> vertices) {
  require(static_cast<int>(vertices.size()) == mesh.vertex_count(),
          "vertex list does not match the mesh");
  std::vector<Vec3> normals(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [i, j, k] = mesh.faces[f];
    const Vec3 c = (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]);
    const double len = c.norm();
    if (!(len > 0.0)) fail(ErrorKind::Numerical, fmt::format("face {} is degenerate", f));
    normals[f] = c / len;
  }
  return normals;
}

std::vector<std::pair<int, int>> adjacent_face_pairs(const TemplateMesh& mesh) {
  struct Entry {
    std::uint64_t key;
    int face;
  };
  std::vector<Entry> entries;
  entries.reserve(mesh.faces.size() * 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      entries.push_back({edge_key(mesh.faces[f][k], mesh.faces[f][(k + 1) % 3]), static_cast<int>(f)});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.face < b.face;
  });
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i].key == entries[i + 1].key) {
      pairs.emplace_back(entries[i].face, entries[i + 1].face);
      ++i;
    }
  }
  return pairs;
}

std::vector<Vec3> apply_blendshapes(const BlendshapeSet& set, std::span<const double> coeffs) {
  require(static_cast<int>(coeffs.size()) == set.shape_count(),
          fmt::format("expected {} blendshape coefficients, got {}", set.shape_count(), coeffs.size()));
  std::vector<Vec3> out = set.base;
  for (int s = 0; s < set.shape_count(); ++s) {
    require(set.shapes[s].size() == set.base.size(), "blendshape delta length mismatch");
    if (coeffs[s] == 0.0) continue;
    for (std::size_t v = 0; v < out.size(); ++v) out[v] += coeffs[s] * set.shapes[s][v];
  }
  return out;
}

DomainMask rasterize_uv_domain(const TemplateMesh& mesh, int resolution) {
  require(resolution >= 16, "UV domain resolution must be at least 16");
  DomainMask dom;
  dom.resolution = resolution;
  dom.inside = Mask(resolution, resolution);
  dom.face.assign(static_cast<std::size_t>(resolution) * resolution, -1);

  for (int f = 0; f < mesh.face_count(); ++f) {
    // Work in texel coordinates: x = u*R - 0.5, y = (1-v)*R - 0.5, so texel centres are integers.
    std::array<Vec2, 3> t;
    for (int k = 0; k < 3; ++k) {
      const Vec2 uv = mesh.corner_uv(f, k);
      t[k] = {uv.x() * resolution - 0.5, (1.0 - uv.y()) * resolution - 0.5};
    }
    const double area = edge_fn(t[0], t[1], t[2]);
    if (area == 0.0) continue;
    const double sign = area > 0 ? 1.0 : -1.0;
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({t[0].x(), t[1].x(), t[2].x()}))));
    const int x1 = std::min(resolution - 1, static_cast<int>(std::floor(std::max({t[0].x(), t[1].x(), t[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({t[0].y(), t[1].y(), t[2].y()}))));
    const int y1 = std::min(resolution - 1, static_cast<int>(std::floor(std::max({t[0].y(), t[1].y(), t[2].y()}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x, y);
        if (sign * edge_fn(t[0], t[1], p) >= 0 && sign * edge_fn(t[1], t[2], p) >= 0 &&
            sign * edge_fn(t[2], t[0], p) >= 0) {
          const std::size_t idx = static_cast<std::size_t>(y) * resolution + x;
          if (dom.face[idx] < 0) {
            dom.face[idx] = f;
            dom.inside.bits[idx] = 1;
          }
        }
      }
    }
  }
  if (dom.inside.count() == 0) {
    fail(ErrorKind::InvalidArgument, "DomainMask invariant violation: no texel lies inside the UV atlas");
  }
  return dom;
}

std::vector<View> face_views(const TemplateMesh& mesh) {
  std::vector<View> views(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [i, j, k] = mesh.faces[f];
    const Vec3 c = (mesh.vertices[j] - mesh.vertices[i]).cross(mesh.vertices[k] - mesh.vertices[i]);
    views[f] = c.z() >= 0.0 ? View::Front : View::Back;
  }
  return views;
}

bool landmark_uv(const TemplateMesh& mesh, const std::vector<View>& views, int vertex, View view,
                 Vec2& uv) {
  const Vec3& p = mesh.vertices[vertex];
  // Prefer the vertex itself, then any coincident copy.
  for (int pass = 0; pass < 2; ++pass) {
    for (int f = 0; f < mesh.face_count(); ++f) {
      if (views[f] != view) continue;
      for (int k = 0; k < 3; ++k) {
        const int v = mesh.faces[f][k];
        const bool match = pass == 0 ? v == vertex : (mesh.vertices[v] - p).norm() < 1e-9;
        if (match) {
          uv = mesh.corner_uv(f, k);
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace gtex
