#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gtex/image.hpp"

namespace gtex {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Face = std::array<int, 3>;

/// Fixed-topology garment template. Model units, the garment front faces +z.
///
/// UVs are stored OBJ-style: a coordinate pool plus per-face-corner indices,
/// so seams may give one vertex several UVs.
struct TemplateMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec2> uvs;
  std::vector<Face> face_uvs;
  std::map<std::string, int> landmarks;
  std::string category;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
  Vec2 corner_uv(int face, int corner) const { return uvs[face_uvs[face][corner]]; }

  /// Throws BadInput naming the first violated invariant.
  void validate() const;
};

/// Per-vertex deltas over a base mesh. A shape's contribution is coeff * delta.
struct BlendshapeSet {
  std::vector<Vec3> base;
  std::vector<std::vector<Vec3>> shapes;
  std::vector<std::string> names;

  int shape_count() const { return static_cast<int>(shapes.size()); }
};

/// Texels whose centre lies inside some face's UV triangle.
struct DomainMask {
  int resolution = 0;
  Mask inside;
  /// Owning face per texel (-1 outside). Ties resolve to the lowest face index.
  std::vector<int> face;

  bool operator()(int x, int y) const { return inside(x, y); }
  std::size_t inside_count() const { return inside.count(); }
};

std::vector<Vec3> face_normals(const TemplateMesh& mesh, std::span<const Vec3> vertices);

/// Every pair of faces sharing an edge, once, ordered by the shared edge.
std::vector<std::pair<int, int>> adjacent_face_pairs(const TemplateMesh& mesh);

std::vector<Vec3> apply_blendshapes(const BlendshapeSet& set, std::span<const double> coeffs);

DomainMask rasterize_uv_domain(const TemplateMesh& mesh, int resolution);

/// UV centre of texel (x, y) at the given resolution.
inline Vec2 texel_center_uv(int x, int y, int resolution) {
  return {(x + 0.5) / resolution, 1.0 - (y + 0.5) / resolution};
}

/// Which catalog view a face is textured from, decided by the sign of its
/// template normal's z component (front panels face +z).
enum class View { Front, Back };
std::vector<View> face_views(const TemplateMesh& mesh);

/// UV of a landmark vertex as seen in the chart of `view`. Seam landmarks have
/// coincident copies in both charts; the copy owned by a face of that view is used.
/// Returns false when no such copy exists.
bool landmark_uv(const TemplateMesh& mesh, const std::vector<View>& views, int vertex, View view,
                 Vec2& uv);

// ---- file formats ----

/// ASCII OBJ with v, vt and triangular `f v/vt` records. vn and grouping
/// statements are ignored.
TemplateMesh load_obj(const std::filesystem::path& path);
TemplateMesh parse_obj(std::string_view text, const std::string& source_name = "<memory>");
void save_obj(const std::filesystem::path& path, const TemplateMesh& mesh,
              std::span<const Vec3> vertices = {});
std::string format_obj(const TemplateMesh& mesh, std::span<const Vec3> vertices = {});

/// Delta OBJ: one `v dx dy dz` per base vertex.
std::vector<Vec3> load_blendshape_delta(const std::filesystem::path& path, int vertex_count);
void save_blendshape_delta(const std::filesystem::path& path, std::span<const Vec3> delta,
                           const std::string& name);

/// {"landmarks": {"name": index, ...}, "category": "..."}
void load_landmarks(const std::filesystem::path& path, TemplateMesh& mesh);
void save_landmarks(const std::filesystem::path& path, const TemplateMesh& mesh);

}  // namespace gtex
