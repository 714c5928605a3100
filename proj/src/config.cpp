#include "gtex/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include <fmt/core.h>

#include "gtex/error.hpp"

namespace gtex {
namespace {

struct Field {
  const char* key;
  std::variant<double*, int*> target;
};

std::vector<Field> fields(PipelineConfig& c) {
  FitConfig& f = c.fit;
  RefineParams& r = c.refine;
  return {
      {"w_sil", &f.w_sil},
      {"w_lmk", &f.w_lmk},
      {"w_arap", &f.w_arap},
      {"w_arap_end", &f.w_arap_end},
      {"w_norm", &f.w_norm},
      {"w_norm_end", &f.w_norm_end},
      {"w_img", &f.w_img},
      {"w_tv", &f.w_tv},
      {"w_tv_uv", &f.w_tv_uv},
      {"steps_stage1", &f.steps_stage1},
      {"steps_stage2", &f.steps_stage2},
      {"lr_shape", &f.lr_shape},
      {"lr_texture", &f.lr_texture},
      {"adam_beta1", &f.adam_beta1},
      {"adam_beta2", &f.adam_beta2},
      {"adam_eps", &f.adam_eps},
      {"sigma", &f.sigma},
      {"image_size", &f.image_size},
      {"texture_resolution", &f.texture_resolution},
      {"world_extent", &f.world_extent},
      {"downsample_factor", &f.downsample_factor},
      {"node_neighbors", &f.node_neighbors},
      {"skin_nodes", &f.skin_nodes},
      {"scale_min", &f.scale_min},
      {"scale_max", &f.scale_max},
      {"scale_step", &f.scale_step},
      {"coverage_fraction", &r.coverage_fraction},
      {"dilation", &r.dilation},
      {"ns_iterations", &r.ns_iterations},
      {"ns_step", &r.ns_step},
      {"ns_transport", &r.ns_transport},
      {"bilateral_window", &r.bilateral_window},
      {"sigma_spatial", &r.sigma_spatial},
      {"sigma_range", &r.sigma_range},
  };
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Returns an error message, empty on success.
std::string assign(PipelineConfig& config, std::string_view key, std::string_view value) {
  for (const Field& f : fields(config)) {
    if (key != f.key) continue;
    const bool ok = std::visit([&](auto* p) { return parse_number(value, *p); }, f.target);
    return ok ? std::string() : fmt::format("bad value '{}' for key '{}'", value, key);
  }
  return fmt::format("unknown key '{}'", key);
}

}  // namespace

FitConfig FitConfig::desk() {
  FitConfig c;
  c.steps_stage1 = 300;
  c.steps_stage2 = 300;
  c.image_size = 128;
  c.texture_resolution = 256;
  c.sigma = 1e-5;
  c.w_tv_uv = 0.5;
  return c;
}

void FitConfig::validate() const {
  for (double w : {w_sil, w_lmk, w_arap, w_arap_end, w_norm, w_norm_end, w_img, w_tv, w_tv_uv}) {
    if (!(w >= 0.0)) fail(ErrorKind::InvalidArgument, "energy weights must be non-negative");
  }
  if (w_arap_end > w_arap || w_norm_end > w_norm) {
    fail(ErrorKind::InvalidArgument, "decay targets must not exceed the initial weights");
  }
  if (steps_stage1 < 1 || steps_stage2 < 1) fail(ErrorKind::InvalidArgument, "step counts must be at least 1");
  if (!(lr_shape > 0.0 && lr_texture > 0.0 && sigma > 0.0 && world_extent > 0.0 && adam_eps > 0.0)) {
    fail(ErrorKind::InvalidArgument, "learning rates, sigma, extent and epsilon must be positive");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorKind::InvalidArgument, "Adam betas must lie in [0, 1)");
  }
  if (image_size < 16 || texture_resolution < 16) fail(ErrorKind::InvalidArgument, "resolutions must be at least 16");
  if (downsample_factor < 2 || node_neighbors < 1 || skin_nodes < 1) {
    fail(ErrorKind::InvalidArgument, "invalid deformation graph settings");
  }
  if (!(scale_min > 0.0 && scale_max >= scale_min && scale_step > 0.0)) {
    fail(ErrorKind::InvalidArgument, "invalid scale sweep");
  }
}

void RefineParams::validate() const {
  if (!(coverage_fraction > 0.0 && ns_step > 0.0 && sigma_spatial > 0.0 && sigma_range > 0.0)) {
    fail(ErrorKind::InvalidArgument, "refine parameters must be positive");
  }
  if (!(ns_transport >= 0.0 && ns_transport <= 1.0)) fail(ErrorKind::InvalidArgument, "ns_transport must lie in [0, 1]");
  if (dilation < 0 || ns_iterations < 1) fail(ErrorKind::InvalidArgument, "invalid dilation or iteration count");
  if (bilateral_window < 1 || bilateral_window % 2 == 0) {
    fail(ErrorKind::InvalidArgument, "bilateral window must be odd and positive");
  }
}

PipelineConfig parse_config(std::string_view text, const std::string& source_name, const PipelineConfig& base) {
  PipelineConfig config = base;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::BadInput, fmt::format("{}:{}: expected 'key = value'", source_name, line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      fail(ErrorKind::BadInput, fmt::format("{}:{}: duplicate key '{}'", source_name, line_no, key));
    }
    if (const std::string err = assign(config, key, value); !err.empty()) {
      fail(ErrorKind::BadInput, fmt::format("{}:{}: {}", source_name, line_no, err));
    }
  }
  config.fit.validate();
  config.refine.validate();
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, fmt::format("cannot open config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), base);
}

void apply_override(PipelineConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorKind::InvalidArgument, fmt::format("override '{}' is not key=value", assignment));
  }
  if (const std::string err = assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
      !err.empty()) {
    fail(ErrorKind::InvalidArgument, err);
  }
  config.fit.validate();
  config.refine.validate();
}

std::string dump_config(const PipelineConfig& config) {
  PipelineConfig copy = config;
  std::string out;
  for (const Field& f : fields(copy)) {
    std::visit([&](auto* p) { out += fmt::format("{} = {}\n", f.key, *p); }, f.target);
  }
  return out;
}

}  // namespace gtex
