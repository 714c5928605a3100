#include "gtex/garment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

constexpr int kFront = 0;
constexpr int kBack = 1;

struct Cell {
  int i = 0;
  int j = 0;
};

struct SeamSegment {
  Vec2 a;
  Vec2 b;
};

// A panel garment laid out on a square grid of spacing `h`. Cells are assigned
// to pieces by their centre; each (side, piece) becomes a separate grid patch.
struct PatternSpec {
  double h = 0.02;
  int grid_half = 60;
  int piece_count = 1;
  std::function<int(double cx, double cy, int side)> classify;
  // True when a boundary edge (from a to b, bordering a cell of `piece`) is an
  // opening of the garment rather than a front/back seam.
  std::function<bool(const Vec2& a, const Vec2& b, int piece)> is_opening;
  std::vector<int> split_pieces;  // pieces that may receive centre-split cells
  int center_splits = 0;
  int half_cells = 0;
  double wrap_band = 0.12;
  double bulge = 0.05;
  double uv_scale = 0.29;
  double uv_center_y = 0.0;
};

struct VertexInfo {
  Vec2 pattern;
  int side = 0;
  int piece = 0;
  double seam_distance = 0.0;
};

struct BuiltPattern {
  TemplateMesh mesh;
  std::vector<VertexInfo> info;
  std::vector<SeamSegment> seams;
};

double point_segment(const Vec2& p, const SeamSegment& s, Vec2& closest) {
  const Vec2 ab = s.b - s.a;
  const double t = std::clamp((p - s.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  closest = s.a + t * ab;
  return (p - closest).norm();
}

BuiltPattern build_pattern(const PatternSpec& spec) {
  const int n = spec.grid_half;
  const int span = 2 * n;
  auto cell_index = [&](int i, int j) { return static_cast<std::size_t>(i + n) + static_cast<std::size_t>(j + n) * span; };
  auto in_grid = [&](int i, int j) { return i >= -n && i < n && j >= -n && j < n; };

  std::array<std::vector<int>, 2> piece_of;
  for (int side = 0; side < 2; ++side) {
    piece_of[side].assign(static_cast<std::size_t>(span) * span, -1);
    for (int j = -n; j < n; ++j) {
      for (int i = -n; i < n; ++i) {
        piece_of[side][cell_index(i, j)] = spec.classify((i + 0.5) * spec.h, (j + 0.5) * spec.h, side);
      }
    }
  }
  auto piece_at = [&](int side, int i, int j) { return in_grid(i, j) ? piece_of[side][cell_index(i, j)] : -1; };

  BuiltPattern out;

  // Outer seams: boundary edges of the front union that are boundary edges of
  // the back union with the same inside cell, minus openings.
  {
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int j = -n; j < n; ++j) {
      for (int i = -n; i < n; ++i) {
        const int pf = piece_at(kFront, i, j);
        if (pf < 0 || piece_at(kBack, i, j) < 0) continue;
        for (int e = 0; e < 4; ++e) {
          const int oi = i + di[e];
          const int oj = j + dj[e];
          if (piece_at(kFront, oi, oj) >= 0 || piece_at(kBack, oi, oj) >= 0) continue;
          Vec2 a;
          Vec2 b;
          if (e == 0) { a = {(i + 1) * spec.h, j * spec.h}; b = {(i + 1) * spec.h, (j + 1) * spec.h}; }
          if (e == 1) { a = {i * spec.h, j * spec.h}; b = {i * spec.h, (j + 1) * spec.h}; }
          if (e == 2) { a = {i * spec.h, (j + 1) * spec.h}; b = {(i + 1) * spec.h, (j + 1) * spec.h}; }
          if (e == 3) { a = {i * spec.h, j * spec.h}; b = {(i + 1) * spec.h, j * spec.h}; }
          if (!spec.is_opening(a, b, pf)) out.seams.push_back({a, b});
        }
      }
    }
  }

  // Cells per (side, piece) in (j, i) order.
  std::vector<std::vector<Cell>> cells(2 * spec.piece_count);
  for (int side = 0; side < 2; ++side) {
    for (int j = -n; j < n; ++j) {
      for (int i = -n; i < n; ++i) {
        const int p = piece_at(side, i, j);
        if (p >= 0) cells[side * spec.piece_count + p].push_back({i, j});
      }
    }
  }

  // Centre splits, spread evenly over the eligible cells.
  std::vector<std::pair<int, std::size_t>> eligible;  // (group, cell index)
  for (int side = 0; side < 2; ++side) {
    for (int p : spec.split_pieces) {
      const int g = side * spec.piece_count + p;
      for (std::size_t c = 0; c < cells[g].size(); ++c) eligible.emplace_back(g, c);
    }
  }
  std::vector<std::vector<bool>> split(cells.size());
  for (std::size_t g = 0; g < cells.size(); ++g) split[g].assign(cells[g].size(), false);
  for (int m = 0; m < spec.center_splits; ++m) {
    const std::size_t k = static_cast<std::size_t>(m + 1) * eligible.size() / (spec.center_splits + 1);
    split[eligible[k].first][eligible[k].second] = true;
  }

  TemplateMesh& mesh = out.mesh;
  int half_cells_left = spec.half_cells;

  for (int side = 0; side < 2; ++side) {
    for (int p = 0; p < spec.piece_count; ++p) {
      const int g = side * spec.piece_count + p;
      const auto& pc = cells[g];
      if (pc.empty()) continue;

      std::map<std::pair<int, int>, int> corner_id;  // key (j, i)
      for (const Cell& c : pc) {
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) corner_id.emplace(std::make_pair(c.j + dy, c.i + dx), -1);
        }
      }
      for (auto& [key, id] : corner_id) {
        id = mesh.vertex_count();
        mesh.vertices.emplace_back(0, 0, 0);
        out.info.push_back({Vec2(key.second * spec.h, key.first * spec.h), side, p, 0.0});
      }
      std::vector<int> center_id(pc.size(), -1);
      for (std::size_t c = 0; c < pc.size(); ++c) {
        if (!split[g][c]) continue;
        center_id[c] = mesh.vertex_count();
        mesh.vertices.emplace_back(0, 0, 0);
        out.info.push_back({Vec2((pc[c].i + 0.5) * spec.h, (pc[c].j + 0.5) * spec.h), side, p, 0.0});
      }

      // Front faces wind counter-clockwise seen from +z, back faces from -z.
      auto add = [&](int a, int b, int c) {
        if (side == kFront) mesh.faces.push_back({a, b, c});
        else mesh.faces.push_back({a, c, b});
      };
      for (std::size_t c = 0; c < pc.size(); ++c) {
        const int v00 = corner_id.at({pc[c].j, pc[c].i});
        const int v10 = corner_id.at({pc[c].j, pc[c].i + 1});
        const int v01 = corner_id.at({pc[c].j + 1, pc[c].i});
        const int v11 = corner_id.at({pc[c].j + 1, pc[c].i + 1});
        if (center_id[c] >= 0) {
          const int m = center_id[c];
          add(v00, v10, m);
          add(v10, v11, m);
          add(v11, v01, m);
          add(v01, v00, m);
        } else if (side == kFront) {
          add(v00, v10, v11);
          add(v00, v11, v01);
        } else {
          // Opposite diagonal on the back panel.
          add(v00, v10, v01);
          add(v10, v11, v01);
        }
      }

      // Half cells: empty cells next to this piece with exactly three corners present.
      if (half_cells_left > 0) {
        std::map<std::pair<int, int>, bool> seen;
        for (const Cell& c : pc) {
          for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
              const int ci = c.i + di;
              const int cj = c.j + dj;
              if (piece_at(side, ci, cj) < 0) seen.emplace(std::make_pair(cj, ci), true);
            }
          }
        }
        for (const auto& [key, unused] : seen) {
          if (half_cells_left == 0) break;
          const auto [cj, ci] = key;
          const std::array<std::pair<int, int>, 4> ring = {{{cj, ci}, {cj, ci + 1}, {cj + 1, ci + 1}, {cj + 1, ci}}};
          std::vector<int> present;
          for (const auto& corner : ring) {
            if (auto it = corner_id.find(corner); it != corner_id.end()) present.push_back(it->second);
          }
          if (present.size() != 3) continue;
          add(present[0], present[1], present[2]);  // ring order is counter-clockwise
          --half_cells_left;
        }
      }
    }
  }
  if (half_cells_left != 0) fail(ErrorKind::InvalidArgument, "pattern has too few half-cell candidates");

  // Wrap the fabric around the outer seams: inside the band the panel is
  // foreshortened towards the seam and rises out of the z = 0 plane.
  const double band = spec.wrap_band;
  for (std::size_t v = 0; v < out.info.size(); ++v) {
    VertexInfo& vi = out.info[v];
    double best = std::numeric_limits<double>::infinity();
    Vec2 nearest = vi.pattern;
    for (const SeamSegment& s : out.seams) {
      Vec2 c;
      const double d = point_segment(vi.pattern, s, c);
      if (d < best) {
        best = d;
        nearest = c;
      }
    }
    vi.seam_distance = best;
    Vec2 xy = vi.pattern;
    double lift = 1.0;
    if (best < band) {
      const double s = best / band;
      const double projected = band * (2.0 * s * s - s * s * s);
      if (best > 0.0) xy = nearest + (vi.pattern - nearest) * (projected / best);
      lift = std::sqrt(1.0 - (1.0 - s) * (1.0 - s));
    }
    const double z = (vi.side == kFront ? 1.0 : -1.0) * spec.bulge * lift;
    mesh.vertices[v] = Vec3(xy.x(), xy.y(), z);
    const double mirror = vi.side == kFront ? 1.0 : -1.0;
    const double vcenter = vi.side == kFront ? 0.75 : 0.25;
    mesh.uvs.emplace_back(0.5 + mirror * vi.pattern.x() * spec.uv_scale,
                          vcenter + (vi.pattern.y() - spec.uv_center_y) * spec.uv_scale);
  }
  mesh.face_uvs = mesh.faces;
  return out;
}

int nearest_vertex(const BuiltPattern& bp, int side, int piece, const Vec2& target, bool on_seam) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < bp.info.size(); ++v) {
    const VertexInfo& vi = bp.info[v];
    if (vi.side != side || vi.piece != piece) continue;
    if (on_seam && vi.seam_distance > 1e-12) continue;
    const double d = (vi.pattern - target).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(v);
    }
  }
  require(best >= 0, "landmark target has no candidate vertex");
  return best;
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

TemplateAsset make_tshirt_template() {
  constexpr double kNeckHalfWidth = 0.17;
  constexpr double kNeckDepth[2] = {0.16, 0.06};
  constexpr double kTop = 0.55;
  constexpr double kHem = -1.0;
  constexpr double kHemBand = 0.08;
  constexpr double kArmpit = 0.13;
  constexpr double kCuff = 0.95;
  constexpr double kTorsoHalf = 0.5;
  enum Piece { kTorso = 0, kHemBandPiece = 1, kSleeveLeft = 2, kSleeveRight = 3 };

  PatternSpec spec;
  spec.h = 0.0218;
  spec.grid_half = static_cast<int>(std::ceil(1.2 / spec.h)) + 1;
  spec.piece_count = 4;
  spec.classify = [&](double cx, double cy, int side) -> int {
    const double ax = std::abs(cx);
    if (!(cy < kTop)) return -1;
    if (ax < kTorsoHalf) {
      if (!(cy > kHem)) return -1;
    } else if (ax < kCuff) {
      if (!(cy > kArmpit)) return -1;
    } else {
      return -1;
    }
    const double ex = cx / kNeckHalfWidth;
    const double ey = (cy - kTop) / kNeckDepth[side];
    if (ex * ex + ey * ey < 1.0) return -1;
    if (ax < kTorsoHalf) return cy < kHem + kHemBand ? kHemBandPiece : kTorso;
    return cx > 0 ? kSleeveRight : kSleeveLeft;
  };
  spec.is_opening = [&](const Vec2& a, const Vec2& b, int piece) {
    const Vec2 mid = 0.5 * (a + b);
    if (piece == kHemBandPiece && a.y() == b.y() && mid.y() < kHem + kHemBand) return true;
    if ((piece == kSleeveLeft || piece == kSleeveRight) && a.x() == b.x() && std::abs(mid.x()) > kCuff - 0.05) {
      return true;
    }
    const double reach = 2.0 * spec.h;
    const double ex = mid.x() / (kNeckHalfWidth + reach);
    const double ey = (mid.y() - kTop) / (kNeckDepth[0] + reach);
    return ex * ex + ey * ey < 1.0;
  };
  spec.split_pieces = {kTorso};
  spec.center_splits = 9;
  spec.half_cells = 1;
  spec.wrap_band = 0.12;
  spec.bulge = 0.05;
  spec.uv_scale = 0.29;
  spec.uv_center_y = 0.5 * (kTop + kHem);

  BuiltPattern bp = build_pattern(spec);
  // Sleeves get their own islands in the side margins of the atlas, turned so
  // the shoulder seam is on top, as in a sewing-pattern layout.
  for (std::size_t v = 0; v < bp.info.size(); ++v) {
    const VertexInfo& vi = bp.info[v];
    if (vi.piece != kSleeveLeft && vi.piece != kSleeveRight) continue;
    const double s = vi.piece == kSleeveRight ? 1.0 : -1.0;
    const double mirror = vi.side == kFront ? 1.0 : -1.0;
    const double along = s * vi.pattern.x() - kTorsoHalf;
    const double across = vi.pattern.y() - 0.5 * (kTop + kArmpit);
    const double vtop = (vi.side == kFront ? 0.75 : 0.25) + 0.2;
    bp.mesh.uvs[v] = Vec2(0.5 + mirror * s * (0.42 + across * spec.uv_scale), vtop - along * spec.uv_scale);
  }
  TemplateAsset asset;
  asset.mesh = std::move(bp.mesh);
  asset.mesh.category = "tshirt";

  auto& lm = asset.mesh.landmarks;
  for (int s = -1; s <= 1; s += 2) {
    const std::string side = s < 0 ? "left" : "right";
    const int sleeve = s < 0 ? kSleeveLeft : kSleeveRight;
    lm["neck_" + side] = nearest_vertex(bp, kFront, kTorso, {s * kNeckHalfWidth, kTop}, true);
    lm["shoulder_" + side] = nearest_vertex(bp, kFront, kTorso, {s * kTorsoHalf, kTop}, true);
    lm["cuff_top_" + side] = nearest_vertex(bp, kFront, sleeve, {s * kCuff, kTop}, true);
    lm["cuff_bottom_" + side] = nearest_vertex(bp, kFront, sleeve, {s * kCuff, kArmpit}, true);
    lm["armpit_" + side] = nearest_vertex(bp, kFront, kTorso, {s * kTorsoHalf, kArmpit}, true);
    lm["hem_" + side] = nearest_vertex(bp, kFront, kHemBandPiece, {s * kTorsoHalf, kHem}, true);
  }
  lm["collar_front"] = nearest_vertex(bp, kFront, kTorso, {0.0, kTop - kNeckDepth[0]}, false);
  lm["collar_back"] = nearest_vertex(bp, kBack, kTorso, {0.0, kTop - kNeckDepth[1]}, false);

  // Blendshapes, as deltas at full strength.
  const auto& base = asset.mesh.vertices;
  BlendshapeSet& bs = asset.blendshapes;
  bs.base = base;
  constexpr double kBendAngle = 65.0 * 3.14159265358979323846 / 180.0;
  for (int s = -1; s <= 1; s += 2) {
    std::vector<Vec3> delta(base.size(), Vec3::Zero());
    const Vec2 pivot(s * kTorsoHalf, kTop);
    for (std::size_t v = 0; v < base.size(); ++v) {
      const VertexInfo& vi = bp.info[v];
      if (vi.pattern.x() * s <= kTorsoHalf) continue;
      const double w = smoothstep((std::abs(vi.pattern.x()) - kTorsoHalf) / 0.15);
      const double angle = -s * kBendAngle * w;  // sleeves swing down towards the torso
      const Vec2 r(base[v].x() - pivot.x(), base[v].y() - pivot.y());
      const Vec2 rotated(std::cos(angle) * r.x() - std::sin(angle) * r.y(),
                         std::sin(angle) * r.x() + std::cos(angle) * r.y());
      delta[v] = Vec3(pivot.x() + rotated.x() - base[v].x(), pivot.y() + rotated.y() - base[v].y(),
                      1.5 * w * base[v].z());
    }
    bs.shapes.push_back(std::move(delta));
    bs.names.push_back(s < 0 ? "sleeve_bend_left" : "sleeve_bend_right");
  }
  {
    std::vector<Vec3> delta(base.size(), Vec3::Zero());
    for (std::size_t v = 0; v < base.size(); ++v) {
      const VertexInfo& vi = bp.info[v];
      if (vi.piece != kTorso && vi.piece != kHemBandPiece) continue;
      const double t = std::clamp((-0.2 - vi.pattern.y()) / 0.8, 0.0, 1.0);
      delta[v] = Vec3(0.12 * t * base[v].x(), 0.0, 0.0);
    }
    bs.shapes.push_back(std::move(delta));
    bs.names.push_back("hem_flare");
  }
  // Shapes are kept in filename order so a reload reproduces the same coefficient layout.
  std::vector<std::size_t> order(bs.shapes.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bs.names[a] < bs.names[b]; });
  BlendshapeSet sorted;
  sorted.base = bs.base;
  for (std::size_t k : order) {
    sorted.shapes.push_back(bs.shapes[k]);
    sorted.names.push_back(bs.names[k]);
  }
  bs = std::move(sorted);
  asset.mesh.validate();
  return asset;
}

TemplateAsset make_quad_template() {
  constexpr double kHalf = 0.6;
  PatternSpec spec;
  spec.h = 0.04;
  spec.grid_half = static_cast<int>(std::ceil(0.7 / spec.h)) + 1;
  spec.piece_count = 1;
  spec.classify = [](double cx, double cy, int) -> int {
    return std::abs(cx) < kHalf && std::abs(cy) < kHalf ? 0 : -1;
  };
  spec.is_opening = [](const Vec2&, const Vec2&, int) { return false; };
  spec.wrap_band = 0.12;
  spec.bulge = 0.05;
  spec.uv_scale = 0.38;
  spec.uv_center_y = 0.0;

  BuiltPattern bp = build_pattern(spec);
  TemplateAsset asset;
  asset.mesh = std::move(bp.mesh);
  asset.mesh.category = "quad";
  auto& lm = asset.mesh.landmarks;
  lm["corner_bottom_left"] = nearest_vertex(bp, kFront, 0, {-kHalf, -kHalf}, true);
  lm["corner_bottom_right"] = nearest_vertex(bp, kFront, 0, {kHalf, -kHalf}, true);
  lm["corner_top_left"] = nearest_vertex(bp, kFront, 0, {-kHalf, kHalf}, true);
  lm["corner_top_right"] = nearest_vertex(bp, kFront, 0, {kHalf, kHalf}, true);
  lm["edge_bottom"] = nearest_vertex(bp, kFront, 0, {0.0, -kHalf}, true);
  lm["edge_top"] = nearest_vertex(bp, kFront, 0, {0.0, kHalf}, true);
  lm["edge_left"] = nearest_vertex(bp, kFront, 0, {-kHalf, 0.0}, true);
  lm["edge_right"] = nearest_vertex(bp, kFront, 0, {kHalf, 0.0}, true);

  BlendshapeSet& bs = asset.blendshapes;
  bs.base = asset.mesh.vertices;
  std::vector<Vec3> shear(bs.base.size());
  for (std::size_t v = 0; v < bs.base.size(); ++v) shear[v] = Vec3(0.06 * bs.base[v].y(), 0.0, 0.0);
  bs.shapes.push_back(std::move(shear));
  bs.names.push_back("shear");
  asset.mesh.validate();
  return asset;
}

std::vector<std::string> landmarks_in_view(const TemplateMesh& mesh, View view) {
  const auto views = face_views(mesh);
  std::vector<std::string> names;
  for (const auto& [name, index] : mesh.landmarks) {
    Vec2 uv;
    if (landmark_uv(mesh, views, index, view, uv)) names.push_back(name);
  }
  return names;
}

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("GTEX_ASSETS"); env && *env) return env;
  return GTEX_ASSET_DIR;
}

std::filesystem::path resolve_template(const std::string& name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_directory(direct)) return direct;
  const auto shipped = asset_dir() / "templates" / name_or_path;
  if (std::filesystem::is_directory(shipped)) return shipped;
  fail(ErrorKind::BadInput, fmt::format("unknown template '{}'", name_or_path));
}

TemplateAsset load_template_asset(const std::filesystem::path& dir) {
  TemplateAsset asset;
  asset.mesh = load_obj(dir / "template.obj");
  load_landmarks(dir / "landmarks.json", asset.mesh);
  asset.blendshapes.base = asset.mesh.vertices;
  const auto shape_dir = dir / "blendshapes";
  if (std::filesystem::is_directory(shape_dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(shape_dir)) {
      if (entry.path().extension() == ".obj") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      asset.blendshapes.shapes.push_back(load_blendshape_delta(f, asset.mesh.vertex_count()));
      asset.blendshapes.names.push_back(f.stem().string());
    }
  }
  return asset;
}

void save_template_asset(const std::filesystem::path& dir, const TemplateAsset& asset) {
  std::filesystem::create_directories(dir / "blendshapes");
  save_obj(dir / "template.obj", asset.mesh);
  save_landmarks(dir / "landmarks.json", asset.mesh);
  for (int s = 0; s < asset.blendshapes.shape_count(); ++s) {
    save_blendshape_delta(dir / "blendshapes" / (asset.blendshapes.names[s] + ".obj"),
                          asset.blendshapes.shapes[s], asset.blendshapes.names[s]);
  }
}

}  // namespace gtex
