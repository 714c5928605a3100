#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>

#include "fixtures.hpp"
#include "gtex/error.hpp"
#include "gtex/garment.hpp"
#include "gtex/geometry.hpp"

using namespace gtex;

namespace {

const char* kQuadObj =
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
    "vt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\n"
    "f 1/1 2/2 3/3\nf 1/1 3/3 4/4\n";

TemplateMesh tetrahedron() {
  TemplateMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  m.faces = {Face{0, 2, 1}, Face{0, 1, 3}, Face{1, 2, 3}, Face{0, 3, 2}};
  m.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  m.face_uvs = {Face{0, 1, 2}, Face{0, 1, 2}, Face{0, 1, 2}, Face{0, 1, 2}};
  return m;
}

}  // namespace

TEST_CASE("load_obj: unit quad") {
  const TemplateMesh m = parse_obj(kQuadObj);
  CHECK(m.vertex_count() == 4);
  CHECK(m.face_count() == 2);
  CHECK(m.landmarks.empty());
  CHECK(m.corner_uv(1, 2).isApprox(Vec2(0, 1)));
}

TEST_CASE("load_obj: quad face is rejected with its line") {
  const std::string text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n";
  try {
    parse_obj(text, "quad.obj");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadInput);
    CHECK(std::string(e.what()).find("quad.obj:6") != std::string::npos);
  }
}

TEST_CASE("load_obj: malformed inputs") {
  CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 9/1\n"), Error);
  CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"), Error);
  CHECK_THROWS_AS(parse_obj("v 0 0 zero\n"), Error);
  // A fan of three faces on one edge.
  CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nvt 0 0\n"
                            "f 1/1 2/1 3/1\nf 2/1 1/1 4/1\nf 1/1 2/1 5/1\n"),
                  Error);
}

TEST_CASE("load_obj: text round trip is exact") {
  const TemplateMesh m = fixture::grid(7);
  const TemplateMesh back = parse_obj(format_obj(m));
  CHECK(back.vertices == m.vertices);
  CHECK(back.faces == m.faces);
  CHECK(back.uvs == m.uvs);
  CHECK(back.face_uvs == m.face_uvs);
}

TEST_CASE("shipped T-shirt template counts") {
  const TemplateAsset a = load_template_asset(resolve_template("tshirt"));
  CHECK(a.mesh.vertex_count() == 8523);
  CHECK(a.mesh.face_count() == 16039);
  CHECK(a.mesh.vertex_count() < 10000);
  CHECK(a.mesh.landmarks.size() >= 8);
  CHECK(a.mesh.landmarks.size() <= 16);
  CHECK(a.blendshapes.shape_count() == 3);
}

TEST_CASE("shipped templates reload identically from disk") {
  const TemplateAsset made = make_tshirt_template();
  const TemplateAsset disk = load_template_asset(resolve_template("tshirt"));
  CHECK(made.mesh.faces == disk.mesh.faces);
  CHECK(made.mesh.landmarks == disk.mesh.landmarks);
  REQUIRE(made.mesh.vertices.size() == disk.mesh.vertices.size());
  double err = 0.0;
  for (std::size_t i = 0; i < made.mesh.vertices.size(); ++i) {
    err = std::max(err, (made.mesh.vertices[i] - disk.mesh.vertices[i]).norm());
  }
  CHECK(err < 1e-9);
}

TEST_CASE("face_normals") {
  TemplateMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.faces = {Face{0, 1, 2}};
  m.uvs = {Vec2(0, 0)};
  m.face_uvs = {Face{0, 0, 0}};
  CHECK(face_normals(m, m.vertices)[0].isApprox(Vec3(0, 0, 1)));
  m.faces = {Face{0, 2, 1}};
  CHECK(face_normals(m, m.vertices)[0].isApprox(Vec3(0, 0, -1)));

  SUBCASE("random triangles match a direct cross product") {
    for (int t = 0; t < 20; ++t) {
      const Vec3 a = fixture::random_vec3(1), b = fixture::random_vec3(1), c = fixture::random_vec3(1);
      m.vertices = {a, b, c};
      m.faces = {Face{0, 1, 2}};
      const Vec3 n = face_normals(m, m.vertices)[0];
      const double cx = (b.y() - a.y()) * (c.z() - a.z()) - (b.z() - a.z()) * (c.y() - a.y());
      const double cy = (b.z() - a.z()) * (c.x() - a.x()) - (b.x() - a.x()) * (c.z() - a.z());
      const double cz = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
      const double len = std::sqrt(cx * cx + cy * cy + cz * cz);
      CHECK(std::abs(n.norm() - 1.0) < 1e-9);
      CHECK((n - Vec3(cx, cy, cz) / len).norm() < 1e-12);
    }
  }
  SUBCASE("degenerate face is reported") {
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    m.faces = {Face{0, 1, 2}};
    CHECK_THROWS_AS(face_normals(m, m.vertices), Error);
  }
}

TEST_CASE("adjacent_face_pairs") {
  TemplateMesh two = parse_obj(kQuadObj);
  CHECK(adjacent_face_pairs(two).size() == 1);
  CHECK(adjacent_face_pairs(tetrahedron()).size() == 6);

  SUBCASE("T-shirt pairs equal an edge census") {
    const TemplateMesh m = load_template_asset(resolve_template("tshirt")).mesh;
    std::map<std::pair<int, int>, int> count;
    for (const Face& f : m.faces) {
      for (int k = 0; k < 3; ++k) {
        const int a = f[k], b = f[(k + 1) % 3];
        ++count[{std::min(a, b), std::max(a, b)}];
      }
    }
    std::size_t interior = 0;
    for (const auto& [e, c] : count) interior += c == 2;
    const auto pairs = adjacent_face_pairs(m);
    CHECK(pairs.size() == interior);
    std::set<std::pair<int, int>> unique(pairs.begin(), pairs.end());
    CHECK(unique.size() == pairs.size());
  }
}

TEST_CASE("apply_blendshapes") {
  BlendshapeSet bs;
  for (int i = 0; i < 30; ++i) bs.base.push_back(fixture::random_vec3(1));
  for (int s = 0; s < 2; ++s) {
    std::vector<Vec3> d;
    for (int i = 0; i < 30; ++i) d.push_back(fixture::random_vec3(0.2));
    bs.shapes.push_back(d);
    bs.names.push_back("s" + std::to_string(s));
  }
  const std::vector<double> zero{0.0, 0.0};
  CHECK(apply_blendshapes(bs, zero) == bs.base);

  const std::vector<double> c{0.3, 0.7};
  const auto out = apply_blendshapes(bs, c);
  for (int i = 0; i < 30; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double expect = bs.base[i][k] + 0.3 * bs.shapes[0][i][k] + 0.7 * bs.shapes[1][i][k];
      CHECK(std::abs(out[i][k] - expect) < 1e-14);
    }
  }

  SUBCASE("single shape at coefficient 1") {
    BlendshapeSet one = bs;
    one.shapes.resize(1);
    one.names.resize(1);
    const std::vector<double> c1{1.0};
    const auto o = apply_blendshapes(one, c1);
    for (int i = 0; i < 30; ++i) CHECK(o[i] == bs.base[i] + bs.shapes[0][i]);
  }
  SUBCASE("affine in the coefficients") {
    const std::vector<double> c1{fixture::uniform(0, 1), fixture::uniform(0, 1)};
    const std::vector<double> c2{fixture::uniform(0, 1), fixture::uniform(0, 1)};
    const double a = 0.4, b = 1.3;
    const std::vector<double> mix{a * c1[0] + b * c2[0], a * c1[1] + b * c2[1]};
    const auto f1 = apply_blendshapes(bs, c1), f2 = apply_blendshapes(bs, c2), fm = apply_blendshapes(bs, mix);
    for (int i = 0; i < 30; ++i) CHECK((fm[i] - (a * f1[i] + b * f2[i] - (a + b - 1) * bs.base[i])).norm() < 1e-12);
  }
  SUBCASE("length mismatch") {
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(apply_blendshapes(bs, bad), Error);
  }
}

TEST_CASE("rasterize_uv_domain") {
  SUBCASE("lower-left half triangle matches a point-in-triangle scan") {
    TemplateMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.faces = {Face{0, 1, 2}};
    m.uvs = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    m.face_uvs = m.faces;
    const DomainMask d = rasterize_uv_domain(m, 64);
    std::size_t oracle = 0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const double u = (x + 0.5) / 64, v = 1.0 - (y + 0.5) / 64;
        const bool in = u >= 0 && v >= 0 && u + v <= 1.0;
        oracle += in;
        CHECK(d(x, y) == in);
      }
    }
    CHECK(std::abs(static_cast<double>(d.inside_count()) - 2048.0) <= 64.0);
    CHECK(d.inside_count() == oracle);
  }
  SUBCASE("full square") {
    const DomainMask d = rasterize_uv_domain(fixture::grid(3), 32);
    CHECK(d.inside_count() == 32u * 32u);
  }
  SUBCASE("empty UV area is an error") {
    TemplateMesh m = fixture::grid(3);
    for (Vec2& uv : m.uvs) uv = Vec2(0.5, 0.5);
    CHECK_THROWS_AS(rasterize_uv_domain(m, 32), Error);
  }
  SUBCASE("resolution below 16 is rejected") { CHECK_THROWS_AS(rasterize_uv_domain(fixture::grid(3), 8), Error); }
  SUBCASE("T-shirt domain fraction is stable across resolutions") {
    const TemplateMesh m = load_template_asset(resolve_template("tshirt")).mesh;
    const double f256 = rasterize_uv_domain(m, 256).inside_count() / (256.0 * 256.0);
    const double f512 = rasterize_uv_domain(m, 512).inside_count() / (512.0 * 512.0);
    CHECK(f256 > 0.1);
    CHECK(std::abs(f256 - f512) / f512 < 0.02);
  }
}

TEST_CASE("landmark files round trip") {
  TemplateMesh m = load_template_asset(resolve_template("quad")).mesh;
  const auto dir = std::filesystem::temp_directory_path() / "gtex_test_landmarks";
  std::filesystem::create_directories(dir);
  save_landmarks(dir / "lm.json", m);
  TemplateMesh other = m;
  other.landmarks.clear();
  load_landmarks(dir / "lm.json", other);
  CHECK(other.landmarks == m.landmarks);
  std::ofstream(dir / "bad.json") << R"({"landmarks": {"x": 999999}})";
  CHECK_THROWS_AS(load_landmarks(dir / "bad.json", other), Error);
  std::filesystem::remove_all(dir);
}
