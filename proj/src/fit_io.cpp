#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "gtex/fit.hpp"

namespace gtex {
namespace {

std::map<std::string, Vec2> read_view(const nlohmann::json& doc, const char* key, const std::string& source) {
  std::map<std::string, Vec2> out;
  if (!doc.contains(key)) return out;
  if (!doc[key].is_object()) fail(ErrorKind::BadInput, fmt::format("{}: \"{}\" must be an object", source, key));
  for (const auto& [name, value] : doc[key].items()) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
      fail(ErrorKind::BadInput, fmt::format("{}: landmark '{}' must be [x, y]", source, name));
    }
    out[name] = Vec2(value[0].get<double>(), value[1].get<double>());
  }
  return out;
}

}  // namespace

ViewLandmarks load_view_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::BadInput, fmt::format("cannot open landmarks {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::BadInput, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.is_object()) fail(ErrorKind::BadInput, fmt::format("{}: expected an object", path.string()));
  return {read_view(doc, "front", path.string()), read_view(doc, "back", path.string())};
}

void save_view_landmarks(const std::filesystem::path& path, const ViewLandmarks& landmarks) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, view] : {std::pair{"front", &landmarks.front}, std::pair{"back", &landmarks.back}}) {
    doc[key] = nlohmann::json::object();
    for (const auto& [name, p] : *view) doc[key][name] = {p.x(), p.y()};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << "\n";
}

std::string format_trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "stage,step,total,sil,lmk,arap,norm,img,tv\n";
  for (const TraceRow& r : trace) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.stage, r.step, r.total, r.sil, r.lmk, r.arap, r.norm, r.img,
                       r.tv);
  }
  return out;
}

}  // namespace gtex
