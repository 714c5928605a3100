// gtex: command-line front end for fitting, baselines, refinement and corpus runs.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "gtex/config.hpp"
#include "gtex/error.hpp"
#include "gtex/fit.hpp"
#include "gtex/garment.hpp"
#include "gtex/harness.hpp"
#include "gtex/png_io.hpp"
#include "gtex/refine.hpp"
#include "gtex/render.hpp"
#include "gtex/tps.hpp"

namespace fs = std::filesystem;
using namespace gtex;

namespace {

constexpr int kOk = 0;
constexpr int kBadInvocation = 2;
constexpr int kBadInput = 3;
constexpr int kNumerical = 4;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int report(int code, const char* kind, const std::string& message) {
  fmt::print(stderr, "gtex: error code={} kind={} message={}\n", code, kind, one_line(message));
  return code;
}

// Artifacts are written into a hidden sibling directory and moved into place
// only once everything succeeded.
class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)) {
    fs::create_directories(out_);
    tmp_ = out_ / fmt::format(".partial-{}", counter_++);
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(tmp_, ec);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return tmp_ / name;
  }
  void commit() {
    for (const std::string& n : names_) fs::rename(tmp_ / n, out_ / n);
  }

 private:
  static inline std::atomic<int> counter_{0};
  fs::path out_;
  fs::path tmp_;
  std::vector<std::string> names_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) fail(ErrorKind::BadInput, fmt::format("missing {} '{}'", what, p.string()));
}

struct ConfigArgs {
  std::string profile = "full";
  std::string config_path;
  std::vector<std::string> overrides;

  void add(CLI::App* cmd, const std::string& default_profile) {
    profile = default_profile;
    cmd->add_option("--profile", profile, "Base defaults: full (published settings) or desk (128^2, 300 steps)")
        ->check(CLI::IsMember({"full", "desk"}))
        ->capture_default_str();
    cmd->add_option("--config", config_path, "Config file of key = value lines, applied over the profile");
    cmd->add_option("--set", overrides, "Override one key (key=value); repeatable")->allow_extra_args(false);
  }

  PipelineConfig resolve() const {
    PipelineConfig base;
    if (profile == "desk") base.fit = FitConfig::desk();
    if (!config_path.empty()) {
      require_file(config_path, "config");
      base = load_config(config_path, base);
    }
    for (const std::string& o : overrides) apply_override(base, o);
    return base;
  }
};

struct ViewArgs {
  std::string template_name;
  std::string front, back, mask_front, mask_back, landmarks;

  void add(CLI::App* cmd) {
    cmd->add_option("--template", template_name, "Template name (e.g. tshirt) or directory")->required();
    cmd->add_option("--front", front, "Front catalog image (PNG)")->required();
    cmd->add_option("--back", back, "Back catalog image (PNG)")->required();
    cmd->add_option("--mask-front", mask_front, "Front silhouette mask (PNG)")->required();
    cmd->add_option("--mask-back", mask_back, "Back silhouette mask (PNG)")->required();
    cmd->add_option("--landmarks", landmarks, "Landmark pixels: {\"front\": {...}, \"back\": {...}}")->required();
  }

  std::vector<Observation> load(const TemplateMesh& mesh, double world_extent) const {
    for (const auto& [p, what] : {std::pair{front, "front image"}, {back, "back image"}, {mask_front, "front mask"},
                                  {mask_back, "back mask"}, {landmarks, "landmarks"}}) {
      require_file(p, what);
    }
    const ViewLandmarks lm = load_view_landmarks(landmarks);
    std::vector<Observation> views(2);
    const std::string images[2] = {front, back};
    const std::string masks[2] = {mask_front, mask_back};
    for (int v = 0; v < 2; ++v) {
      Observation& o = views[v];
      o.image = read_png(images[v]);
      if (o.image.channels() == 1) {
        Image rgb(o.image.width(), o.image.height(), 3);
        for (std::size_t i = 0; i < o.image.pixel_count(); ++i)
          for (int c = 0; c < 3; ++c) rgb.values()[3 * i + c] = o.image.values()[i];
        o.image = std::move(rgb);
      }
      o.silhouette = read_png(masks[v]).to_gray();
      if (o.image.width() != o.image.height()) fail(ErrorKind::BadInput, "catalog images must be square");
      o.camera = Camera{v == 0 ? View::Front : View::Back, world_extent, o.image.width()};
      o.landmarks = v == 0 ? lm.front : lm.back;
      o.validate(mesh);
    }
    if (views[0].image.width() != views[1].image.width()) fail(ErrorKind::BadInput, "front and back sizes differ");
    return views;
  }
};

TemplateMesh load_template_mesh(const std::string& name) { return load_template_asset(resolve_template(name)).mesh; }

int run_fit(const ViewArgs& va, const ConfigArgs& ca, const std::string& out) {
  PipelineConfig pc = ca.resolve();
  const TemplateMesh mesh = load_template_mesh(va.template_name);
  const std::vector<Observation> views = va.load(mesh, pc.fit.world_extent);
  pc.fit.image_size = views[0].camera.image_size;
  const FitResult r = phase1(mesh, views, pc.fit);

  Staging st(out);
  write_png(st.path("coarse.png"), r.coarse);
  write_png16(st.path("coverage.png"), coverage_to_image(r.coverage));
  save_obj(st.path("fitted.obj"), mesh, r.vertices);
  write_text(st.path("trace.csv"), format_trace_csv(r.trace));
  st.commit();
  fmt::print("fit: scale {:.3f}, {} steps, wrote coarse.png coverage.png fitted.obj trace.csv to {}\n", r.scale,
             r.trace.size(), out);
  return kOk;
}

int run_tps(const ViewArgs& va, const ConfigArgs& ca, int resolution, double lambda, const std::string& out) {
  const PipelineConfig pc = ca.resolve();
  const TemplateMesh mesh = load_template_mesh(va.template_name);
  const std::vector<Observation> views = va.load(mesh, pc.fit.world_extent);
  const int res = resolution > 0 ? resolution : pc.fit.texture_resolution;
  const TpsBake bake = tps_bake_texture(mesh, views, res, lambda);

  Staging st(out);
  write_png(st.path("tps.png"), bake.texture);
  write_png(st.path("tps_mask.png"), mask_to_image(bake.missing));
  st.commit();
  fmt::print("warp-tps: {} landmarks, {} missing texels, wrote tps.png tps_mask.png to {}\n", bake.landmark_count,
             bake.missing.count(), out);
  return kOk;
}

int run_refine(const std::string& template_name, const std::string& coarse_path, const std::string& coverage_path,
               const ConfigArgs& ca, const std::string& out) {
  const PipelineConfig pc = ca.resolve();
  require_file(coarse_path, "coarse texture");
  require_file(coverage_path, "coverage map");
  const TemplateMesh mesh = load_template_mesh(template_name);
  const TextureMap coarse = read_png(coarse_path);
  if (coarse.channels() != 3 || coarse.width() != coarse.height()) {
    fail(ErrorKind::BadInput, "coarse texture must be a square RGB image");
  }
  const CoverageMap coverage = image_to_coverage(read_png(coverage_path).to_gray());
  if (coverage.resolution != coarse.width()) fail(ErrorKind::BadInput, "coverage and texture sizes differ");
  const DomainMask domain = rasterize_uv_domain(mesh, coarse.width());
  const ResidualMask mask = residual_mask(coverage, domain, pc.refine);
  const TextureMap filled = inpaint_ns(coarse, mask, domain, pc.refine);
  const TextureMap fine = refine_texture(coarse, filled, mask, domain, pc.refine);

  Image feather(mask.resolution, mask.resolution, 1);
  for (std::size_t i = 0; i < mask.feather.size(); ++i) feather.values()[i] = mask.feather[i];
  Staging st(out);
  write_png(st.path("fine.png"), fine);
  write_png(st.path("mask.png"), feather);
  st.commit();
  fmt::print("refine: hole fraction {:.4f}, wrote fine.png mask.png to {}\n", mask.fraction(domain), out);
  return kOk;
}

int run_simulate(const std::string& spec_path, const ConfigArgs& ca, int workers, const std::string& out) {
  require_file(spec_path, "simulation spec");
  const SimSpec spec = load_sim_spec(spec_path);
  const PipelineConfig pc = ca.resolve();
  const SimSummary s = simulate_pairs(spec, pc.fit, out, worker_count(workers));
  fmt::print("simulate: {} samples, {} failed, dataset in {}\n", s.samples.size(), s.failed(), out);
  if (s.failed() == static_cast<int>(s.samples.size())) fail(ErrorKind::Numerical, "every sample failed");
  return kOk;
}

int run_eval(const std::string& data, const std::vector<std::string>& method_names, const ConfigArgs& ca, int workers,
             const std::string& out) {
  if (!fs::is_directory(data)) fail(ErrorKind::BadInput, fmt::format("missing dataset directory '{}'", data));
  const PipelineConfig pc = ca.resolve();
  std::vector<Method> methods;
  for (const std::string& m : method_names) methods.push_back(m == "tps" ? Method::Tps : Method::Phase1);
  const EvalReport r = evaluate(data, methods, pc.refine, worker_count(workers));
  Staging st(out);
  const fs::path dir = st.path("report.csv").parent_path();
  st.path("report.json");
  write_report(r, dir);
  st.commit();
  for (const EvalMean& m : r.means) {
    fmt::print("eval: {} {} ssim {:.4f} psnr {:.2f} n={}\n", to_string(m.method), to_string(m.stage), m.ssim, m.psnr,
               m.count);
  }
  return kOk;
}

int run_preview(const std::string& mesh_path, const std::string& template_name, const std::string& texture_path,
                int size, double extent, const std::string& out) {
  TemplateMesh mesh;
  if (!mesh_path.empty()) {
    require_file(mesh_path, "mesh");
    mesh = load_obj(mesh_path);
  } else {
    mesh = load_template_mesh(template_name);
  }
  require_file(texture_path, "texture");
  const TextureMap tex = read_png(texture_path);
  require_texture(tex);
  Staging st(out);
  const std::vector<Camera> cams = catalog_cameras(extent, size);
  write_png(st.path("front_render.png"), render_textured(mesh, mesh.vertices, tex, cams[0]));
  write_png(st.path("back_render.png"), render_textured(mesh, mesh.vertices, tex, cams[1]));
  st.commit();
  fmt::print("preview: wrote front_render.png back_render.png to {}\n", out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gtex: garment texture recovery from front/back catalog images"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 2 bad invocation, 3 bad input file, 4 numerical failure.\n"
      "GTEX_WORKERS sets the worker count for simulate/eval; GTEX_ASSETS overrides the template directory.");

  std::string out;
  int workers = 0;

  auto* fit = app.add_subcommand("fit", "Fit the template to a catalog pair and bake the coarse texture");
  ViewArgs fit_views;
  ConfigArgs fit_cfg;
  fit_views.add(fit);
  fit_cfg.add(fit, "full");
  fit->add_option("-o,--out", out, "Output directory")->required();

  auto* tps = app.add_subcommand("warp-tps", "Thin-plate-spline baseline texture from landmarks");
  ViewArgs tps_views;
  ConfigArgs tps_cfg;
  int tps_res = 0;
  double tps_lambda = 1e-6;
  tps_views.add(tps);
  tps_cfg.add(tps, "full");
  tps->add_option("--resolution", tps_res, "Texture resolution (default: config texture_resolution)");
  tps->add_option("--lambda", tps_lambda, "TPS regularization")->capture_default_str();
  tps->add_option("-o,--out", out, "Output directory")->required();

  auto* refine = app.add_subcommand("refine", "Inpaint residual holes of a coarse texture and blend");
  std::string ref_template, ref_coarse, ref_coverage;
  ConfigArgs ref_cfg;
  refine->add_option("--template", ref_template, "Template name or directory")->required();
  refine->add_option("--coarse", ref_coarse, "Coarse texture (PNG)")->required();
  refine->add_option("--coverage", ref_coverage, "Coverage map (16-bit PNG from fit)")->required();
  ref_cfg.add(refine, "full");
  refine->add_option("-o,--out", out, "Output directory")->required();

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic corpus of catalog pairs and coarse textures");
  std::string sim_spec;
  ConfigArgs sim_cfg;
  sim->add_option("--spec", sim_spec, "Simulation spec (key = value lines)")->required();
  sim_cfg.add(sim, "desk");
  sim->add_option("--workers", workers, "Worker threads (default: GTEX_WORKERS or hardware)");
  sim->add_option("-o,--out", out, "Dataset directory")->required();

  auto* ev = app.add_subcommand("eval", "Score TPS and phase-1 textures on a dataset");
  std::string ev_data;
  std::vector<std::string> ev_methods{"tps", "phase1"};
  ConfigArgs ev_cfg;
  ev->add_option("--data", ev_data, "Dataset directory from simulate")->required();
  ev->add_option("--methods", ev_methods, "Methods to score")
      ->delimiter(',')
      ->check(CLI::IsMember({"tps", "phase1"}))
      ->capture_default_str();
  ev_cfg.add(ev, "desk");
  ev->add_option("--workers", workers, "Worker threads (default: GTEX_WORKERS or hardware)");
  ev->add_option("-o,--out", out, "Report directory")->required();

  auto* prev = app.add_subcommand("preview", "Render front and back views of a textured mesh");
  std::string prev_mesh, prev_template, prev_texture;
  int prev_size = 512;
  double prev_extent = 1.2;
  auto* mesh_opt = prev->add_option("--mesh", prev_mesh, "OBJ with UVs");
  prev->add_option("--template", prev_template, "Template name or directory")->excludes(mesh_opt);
  prev->add_option("--texture", prev_texture, "Texture (PNG)")->required();
  prev->add_option("--size", prev_size, "Image size")->capture_default_str()->check(CLI::Range(16, 8192));
  prev->add_option("--extent", prev_extent, "Half-width of the view in model units")->capture_default_str();
  prev->add_option("-o,--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kBadInvocation, "usage", e.what());
  }

  try {
    if (*fit) return run_fit(fit_views, fit_cfg, out);
    if (*tps) return run_tps(tps_views, tps_cfg, tps_res, tps_lambda, out);
    if (*refine) return run_refine(ref_template, ref_coarse, ref_coverage, ref_cfg, out);
    if (*sim) return run_simulate(sim_spec, sim_cfg, workers, out);
    if (*ev) return run_eval(ev_data, ev_methods, ev_cfg, workers, out);
    if (*prev) {
      if (prev_mesh.empty() && prev_template.empty()) {
        return report(kBadInvocation, "usage", "preview needs --mesh or --template");
      }
      return run_preview(prev_mesh, prev_template, prev_texture, prev_size, prev_extent, out);
    }
  } catch (const DivergenceError& e) {
    return report(kNumerical, "numerical", e.what());
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::InvalidArgument: return report(kBadInvocation, "invalid_argument", e.what());
      case ErrorKind::BadInput: return report(kBadInput, "bad_input", e.what());
      case ErrorKind::Io: return report(kBadInput, "io", e.what());
      case ErrorKind::Numerical: return report(kNumerical, "numerical", e.what());
    }
  } catch (const fs::filesystem_error& e) {
    return report(kBadInput, "io", e.what());
  } catch (const std::exception& e) {
    return report(kNumerical, "internal", e.what());
  }
  return kOk;
}
