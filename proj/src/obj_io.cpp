#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/os.h>
#include <json.hpp>

#include "gtex/error.hpp"
#include "gtex/geometry.hpp"

namespace gtex {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::BadInput, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

class LineParser {
 public:
  LineParser(const std::string& source, int line) : source_(source), line_(line) {}

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::BadInput, fmt::format("{}:{}: {}", source_, line_, what));
  }

  double number(std::string_view token) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      error(fmt::format("malformed number '{}'", token));
    }
    return v;
  }

  long integer(std::string_view token) const {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || v == 0) {
      error(fmt::format("malformed index '{}'", token));
    }
    return v;
  }

  // OBJ indices are 1-based; negatives count back from the current end.
  int resolve(long raw, std::size_t count, const char* what) const {
    const long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
    if (idx < 0 || idx >= static_cast<long>(count)) {
      error(fmt::format("{} index {} out of range ({} defined)", what, raw, count));
    }
    return static_cast<int>(idx);
  }

 private:
  const std::string& source_;
  int line_;
};

}  // namespace

TemplateMesh parse_obj(std::string_view text, const std::string& source_name) {
  TemplateMesh mesh;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    const LineParser lp(source_name, line_no);

    if (tok[0] == "v") {
      if (tok.size() < 4) lp.error("vertex needs three coordinates");
      mesh.vertices.emplace_back(lp.number(tok[1]), lp.number(tok[2]), lp.number(tok[3]));
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) lp.error("texture coordinate needs two values");
      mesh.uvs.emplace_back(lp.number(tok[1]), lp.number(tok[2]));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) {
        lp.error(fmt::format("non-triangle face with {} vertices", tok.size() - 1));
      }
      Face f{};
      Face ft{};
      for (int k = 0; k < 3; ++k) {
        const std::string_view corner = tok[k + 1];
        const std::size_t slash = corner.find('/');
        if (slash == std::string_view::npos) lp.error("face corner lacks a texture coordinate");
        std::string_view vt = corner.substr(slash + 1);
        vt = vt.substr(0, vt.find('/'));
        if (vt.empty()) lp.error("face corner lacks a texture coordinate");
        f[k] = lp.resolve(lp.integer(corner.substr(0, slash)), mesh.vertices.size(), "vertex");
        ft[k] = lp.resolve(lp.integer(vt), mesh.uvs.size(), "texture coordinate");
      }
      mesh.faces.push_back(f);
      mesh.face_uvs.push_back(ft);
    } else if (tok[0] == "vn" || tok[0] == "o" || tok[0] == "g" || tok[0] == "s" ||
               tok[0] == "usemtl" || tok[0] == "mtllib") {
      continue;
    } else {
      lp.error(fmt::format("unsupported record '{}'", tok[0]));
    }
  }
  if (mesh.uvs.empty()) fail(ErrorKind::BadInput, fmt::format("{}: no vt records", source_name));
  mesh.validate();
  return mesh;
}

TemplateMesh load_obj(const std::filesystem::path& path) {
  return parse_obj(read_text(path), path.string());
}

std::string format_obj(const TemplateMesh& mesh, std::span<const Vec3> vertices) {
  const std::span<const Vec3> verts = vertices.empty() ? std::span<const Vec3>(mesh.vertices) : vertices;
  require(static_cast<int>(verts.size()) == mesh.vertex_count(), "vertex list does not match the mesh");
  std::string out;
  out.reserve(verts.size() * 48 + mesh.uvs.size() * 32 + mesh.faces.size() * 40);
  if (!mesh.category.empty()) out += fmt::format("# category {}\n", mesh.category);
  for (const Vec3& v : verts) out += fmt::format("v {} {} {}\n", v.x(), v.y(), v.z());
  for (const Vec2& t : mesh.uvs) out += fmt::format("vt {} {}\n", t.x(), t.y());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& a = mesh.faces[f];
    const Face& b = mesh.face_uvs[f];
    out += fmt::format("f {}/{} {}/{} {}/{}\n", a[0] + 1, b[0] + 1, a[1] + 1, b[1] + 1, a[2] + 1, b[2] + 1);
  }
  return out;
}

void save_obj(const std::filesystem::path& path, const TemplateMesh& mesh, std::span<const Vec3> vertices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << format_obj(mesh, vertices);
}

std::vector<Vec3> load_blendshape_delta(const std::filesystem::path& path, int vertex_count) {
  const std::string text = read_text(path);
  std::vector<Vec3> delta;
  int line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    const std::string source = path.string();
    const LineParser lp(source, line_no);
    if (tok[0] != "v") continue;
    if (tok.size() < 4) lp.error("delta needs three components");
    delta.emplace_back(lp.number(tok[1]), lp.number(tok[2]), lp.number(tok[3]));
  }
  if (static_cast<int>(delta.size()) != vertex_count) {
    fail(ErrorKind::BadInput, fmt::format("{}: {} deltas for a {}-vertex base", path.string(),
                                          delta.size(), vertex_count));
  }
  return delta;
}

void save_blendshape_delta(const std::filesystem::path& path, std::span<const Vec3> delta,
                           const std::string& name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << fmt::format("# blendshape delta {}\n", name);
  for (const Vec3& d : delta) out << fmt::format("v {} {} {}\n", d.x(), d.y(), d.z());
}

void load_landmarks(const std::filesystem::path& path, TemplateMesh& mesh) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::BadInput, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.contains("landmarks") || !doc["landmarks"].is_object()) {
    fail(ErrorKind::BadInput, fmt::format("{}: missing \"landmarks\" object", path.string()));
  }
  mesh.landmarks.clear();
  for (const auto& [name, value] : doc["landmarks"].items()) {
    if (!value.is_number_integer()) {
      fail(ErrorKind::BadInput, fmt::format("{}: landmark '{}' is not an integer", path.string(), name));
    }
    mesh.landmarks[name] = value.get<int>();
  }
  if (doc.contains("category") && doc["category"].is_string()) mesh.category = doc["category"];
  mesh.validate();
}

void save_landmarks(const std::filesystem::path& path, const TemplateMesh& mesh) {
  nlohmann::json doc;
  doc["landmarks"] = nlohmann::json::object();
  for (const auto& [name, index] : mesh.landmarks) doc["landmarks"][name] = index;
  if (!mesh.category.empty()) doc["category"] = mesh.category;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << "\n";
}

}  // namespace gtex
