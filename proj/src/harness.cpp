#include "gtex/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/core.h>
#include <json.hpp>

#include "gtex/metrics.hpp"
#include "gtex/png_io.hpp"
#include "gtex/refine.hpp"
#include "gtex/tps.hpp"

namespace gtex {
namespace fs = std::filesystem;

// ---- spec ----

void SimSpec::validate() const {
  if (templates.empty()) fail(ErrorKind::InvalidArgument, "simulation needs at least one template");
  if (samples < 1) fail(ErrorKind::InvalidArgument, "samples must be at least 1");
  if (!(coeff_lo >= 0.0 && coeff_hi >= coeff_lo && coeff_hi <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "blendshape range must satisfy 0 <= lo <= hi <= 1");
  }
  if (image_size < 16 || texture_resolution < 16) fail(ErrorKind::InvalidArgument, "resolutions must be at least 16");
  if (!(world_extent > 0.0)) fail(ErrorKind::InvalidArgument, "world extent must be positive");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

SimSpec parse_sim_spec(std::string_view text, const std::string& source_name) {
  SimSpec spec;
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
    auto bad = [&](const std::string& msg) { fail(ErrorKind::BadInput, fmt::format("{}:{}: {}", source_name, line_no, msg)); };
    if (eq == std::string_view::npos) bad("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) bad(fmt::format("duplicate key '{}'", key));
    bool ok = true;
    if (key == "templates") {
      spec.templates.clear();
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = trim(rest.substr(0, comma));
        if (!item.empty()) spec.templates.emplace_back(item);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
    } else if (key == "samples") ok = parse_number(value, spec.samples);
    else if (key == "recipe") {
      try {
        spec.recipe = parse_recipe(std::string(value));
      } catch (const Error& e) {
        bad(e.what());
      }
    } else if (key == "coeff_lo") ok = parse_number(value, spec.coeff_lo);
    else if (key == "coeff_hi") ok = parse_number(value, spec.coeff_hi);
    else if (key == "image_size") ok = parse_number(value, spec.image_size);
    else if (key == "texture_resolution") ok = parse_number(value, spec.texture_resolution);
    else if (key == "world_extent") ok = parse_number(value, spec.world_extent);
    else if (key == "seed") ok = parse_number(value, spec.seed);
    else bad(fmt::format("unknown key '{}'", key));
    if (!ok) bad(fmt::format("bad value '{}' for key '{}'", value, key));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::BadInput, fmt::format("{}: {}", source_name, e.what()));
  }
  return spec;
}

SimSpec load_sim_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::BadInput, fmt::format("cannot open simulation spec {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sim_spec(ss.str(), path.string());
}

std::string dump_sim_spec(const SimSpec& spec) {
  std::string names;
  for (std::size_t i = 0; i < spec.templates.size(); ++i) names += (i ? "," : "") + spec.templates[i];
  return fmt::format(
      "templates = {}\nsamples = {}\nrecipe = {}\ncoeff_lo = {}\ncoeff_hi = {}\nimage_size = {}\n"
      "texture_resolution = {}\nworld_extent = {}\nseed = {}\n",
      names, spec.samples, to_string(spec.recipe), spec.coeff_lo, spec.coeff_hi, spec.image_size,
      spec.texture_resolution, spec.world_extent, spec.seed);
}

// ---- workers ----

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GTEX_WORKERS")) {
    int n = 0;
    if (parse_number(std::string_view(env), n) && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---- rendering helpers ----

std::vector<Camera> catalog_cameras(double world_extent, int image_size) {
  return {Camera{View::Front, world_extent, image_size}, Camera{View::Back, world_extent, image_size}};
}

std::vector<Observation> render_observations(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                                             const TextureMap& texture, double world_extent, int image_size) {
  std::vector<Observation> out;
  for (const Camera& cam : catalog_cameras(world_extent, image_size)) {
    const Fragments frag = rasterize(vertices, mesh.faces, cam);
    Observation o;
    o.camera = cam;
    o.image = SamplingOperator(mesh, frag, texture.width()).apply(texture);
    o.image.clamp();
    o.silhouette = Image(image_size, image_size, 1);
    for (std::size_t p = 0; p < frag.face.size(); ++p) o.silhouette.values()[p] = frag.covered(p) ? 1.0 : 0.0;
    o.landmarks = project_landmarks(mesh, vertices, cam, landmarks_in_view(mesh, cam.view));
    out.push_back(std::move(o));
  }
  return out;
}

Image coverage_to_image(const CoverageMap& coverage) {
  const int r = coverage.resolution;
  Image out(r, r, 1);
  const double mx = coverage.weight.empty() ? 0.0 : *std::max_element(coverage.weight.begin(), coverage.weight.end());
  for (std::size_t i = 0; i < coverage.weight.size(); ++i) {
    const double w = coverage.weight[i];
    out.values()[i] = w > 0.0 ? std::max(1.0, std::round(w / mx * 65535.0)) / 65535.0 : 0.0;
  }
  return out;
}

CoverageMap image_to_coverage(const Image& image) {
  CoverageMap cov{image.width(), std::vector<double>(image.pixel_count())};
  const Image gray = image.channels() == 1 ? image : image.to_gray();
  for (std::size_t i = 0; i < cov.weight.size(); ++i) cov.weight[i] = gray.values()[i];
  return cov;
}

int SimSummary::failed() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const SampleRecord& r) { return !r.ok; }));
}

// ---- simulation ----

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::BadInput, fmt::format("cannot open {}", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::BadInput, fmt::format("{}: {}", path.string(), e.what()));
  }
}

struct SampleJob {
  int index;
  std::string template_name;
  const TemplateAsset* asset;
};

void run_sample(const SimSpec& spec, const FitConfig& base_config, const SampleJob& job, const fs::path& dir) {
  const TemplateMesh& mesh = job.asset->mesh;
  const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(job.index));
  std::mt19937_64 rng(seed);
  const DomainMask domain = rasterize_uv_domain(mesh, spec.texture_resolution);
  const TextureMap gt = gen_texture(spec.recipe, spec.texture_resolution, rng(), &domain);
  std::vector<double> coeffs(job.asset->blendshapes.shape_count());
  for (double& c : coeffs) c = spec.coeff_lo + (spec.coeff_hi - spec.coeff_lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  const std::vector<Vec3> posed = job.asset->blendshapes.shapes.empty()
                                      ? mesh.vertices
                                      : apply_blendshapes(job.asset->blendshapes, coeffs);
  const std::vector<Observation> views = render_observations(mesh, posed, gt, spec.world_extent, spec.image_size);

  FitConfig config = base_config;
  config.image_size = spec.image_size;
  config.texture_resolution = spec.texture_resolution;
  config.world_extent = spec.world_extent;
  const FitResult fit = phase1(mesh, views, config);

  fs::create_directories(dir);
  write_png(dir / "gt.png", gt);
  write_png(dir / "front.png", views[0].image);
  write_png(dir / "back.png", views[1].image);
  write_png(dir / "mask_front.png", views[0].silhouette);
  write_png(dir / "mask_back.png", views[1].silhouette);
  write_png(dir / "coarse.png", fit.coarse);
  write_png16(dir / "coverage.png", coverage_to_image(fit.coverage));
  save_view_landmarks(dir / "landmarks.json", {views[0].landmarks, views[1].landmarks});
  nlohmann::json meta;
  meta["index"] = job.index;
  meta["seed"] = seed;
  meta["template"] = job.template_name;
  meta["recipe"] = to_string(spec.recipe);
  meta["blendshapes"] = job.asset->blendshapes.names;
  meta["coeffs"] = coeffs;
  meta["scale"] = fit.scale;
  meta["image_size"] = spec.image_size;
  meta["texture_resolution"] = spec.texture_resolution;
  meta["world_extent"] = spec.world_extent;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

}  // namespace

SimSummary simulate_pairs(const SimSpec& spec, const FitConfig& config, const fs::path& out_dir, int workers) {
  spec.validate();
  config.validate();
  std::vector<TemplateAsset> assets;
  for (const std::string& name : spec.templates) {
    assets.push_back(load_template_asset(resolve_template(name)));
    if (assets.back().blendshapes.shapes.empty()) {
      fail(ErrorKind::BadInput, fmt::format("template '{}' has no blendshapes", name));
    }
  }
  std::vector<SampleJob> jobs;
  for (std::size_t t = 0; t < assets.size(); ++t) {
    for (int s = 0; s < spec.samples; ++s) {
      jobs.push_back({static_cast<int>(jobs.size()), spec.templates[t], &assets[t]});
    }
  }
  fs::create_directories(out_dir);
  SimSummary summary;
  summary.samples.resize(jobs.size());
  std::mutex log_mutex;
  parallel_for(static_cast<int>(jobs.size()), worker_count(workers), [&](int i) {
    SampleRecord& rec = summary.samples[i];
    rec.name = fmt::format("sample_{:04d}", i);
    rec.template_name = jobs[i].template_name;
    const fs::path dir = out_dir / rec.name;
    try {
      run_sample(spec, config, jobs[i], dir);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
      std::error_code ec;
      fs::remove_all(dir, ec);
      const std::lock_guard lock(log_mutex);
      fmt::print(stderr, "simulate: {} failed: {}\n", rec.name, rec.error);
    }
  });

  nlohmann::json doc;
  doc["spec"] = dump_sim_spec(spec);
  doc["samples"] = nlohmann::json::array();
  doc["failed"] = nlohmann::json::array();
  for (const SampleRecord& r : summary.samples) {
    if (r.ok) doc["samples"].push_back(r.name);
    else doc["failed"].push_back({{"sample", r.name}, {"error", r.error}});
  }
  write_text(out_dir / "dataset.json", doc.dump(2) + "\n");
  return summary;
}

// ---- evaluation ----

const char* to_string(Method m) { return m == Method::Tps ? "tps" : "phase1"; }
const char* to_string(Stage s) { return s == Stage::None ? "none" : "refined"; }

const EvalMean* EvalReport::find(Method m, Stage s) const {
  for (const EvalMean& e : means) {
    if (e.method == m && e.stage == s) return &e;
  }
  return nullptr;
}

namespace {

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return number(v);
}

}  // namespace

std::string EvalReport::csv() const {
  std::string out = "sample,template,method,stage,ssim,psnr,ssim_covered,hole_fraction,landmarks\n";
  for (const EvalRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.sample, r.template_name, to_string(r.method),
                       to_string(r.stage), number(r.ssim), number(r.psnr), number(r.ssim_covered),
                       number(r.hole_fraction), r.landmark_count);
  }
  return out;
}

std::string EvalReport::json() const {
  nlohmann::json doc;
  doc["means"] = nlohmann::json::array();
  for (const EvalMean& m : means) {
    doc["means"].push_back({{"method", to_string(m.method)},
                            {"stage", to_string(m.stage)},
                            {"ssim", json_number(m.ssim)},
                            {"psnr", json_number(m.psnr)},
                            {"ssim_covered", json_number(m.ssim_covered)},
                            {"count", m.count}});
  }
  doc["rows"] = nlohmann::json::array();
  for (const EvalRow& r : rows) {
    doc["rows"].push_back({{"sample", r.sample},
                           {"template", r.template_name},
                           {"method", to_string(r.method)},
                           {"stage", to_string(r.stage)},
                           {"ssim", json_number(r.ssim)},
                           {"psnr", json_number(r.psnr)},
                           {"ssim_covered", json_number(r.ssim_covered)},
                           {"hole_fraction", json_number(r.hole_fraction)},
                           {"landmarks", r.landmark_count}});
  }
  doc["failed"] = nlohmann::json::array();
  for (const SampleRecord& f : failures) doc["failed"].push_back({{"sample", f.name}, {"error", f.error}});
  return doc.dump(2) + "\n";
}

namespace {

Observation load_view(const fs::path& dir, View view, const std::map<std::string, Vec2>& landmarks, double extent) {
  const std::string side = view == View::Front ? "front" : "back";
  Observation o;
  o.image = read_png(dir / (side + ".png"));
  const Image mask = read_png(dir / ("mask_" + side + ".png"));
  o.silhouette = mask.channels() == 1 ? mask : mask.to_gray();
  o.landmarks = landmarks;
  o.camera = Camera{view, extent, o.image.width()};
  return o;
}

std::vector<EvalRow> evaluate_sample(const fs::path& dir, const std::string& name, const std::vector<Method>& methods,
                                     const RefineParams& params, std::map<std::string, TemplateAsset>& cache,
                                     std::mutex& cache_mutex) {
  const nlohmann::json meta = read_json(dir / "meta.json");
  const std::string tname = meta.value("template", "");
  const double extent = meta.value("world_extent", 1.2);
  const TemplateMesh* mesh = nullptr;
  {
    const std::lock_guard lock(cache_mutex);
    auto it = cache.find(tname);
    if (it == cache.end()) it = cache.emplace(tname, load_template_asset(resolve_template(tname))).first;
    mesh = &it->second.mesh;
  }
  const TextureMap gt = read_png(dir / "gt.png");
  require_texture(gt);
  const int res = gt.width();
  const DomainMask domain = rasterize_uv_domain(*mesh, res);

  std::vector<EvalRow> rows;
  auto score = [&](Method m, Stage s, const TextureMap& tex, const Mask& covered, double hole_fraction, int lmk) {
    EvalRow r;
    r.sample = name;
    r.template_name = tname;
    r.method = m;
    r.stage = s;
    r.ssim = ssim_masked(tex, gt, domain.inside);
    r.psnr = psnr_masked(tex, gt, domain.inside);
    r.ssim_covered = ssim_masked(tex, gt, covered);
    r.hole_fraction = hole_fraction;
    r.landmark_count = lmk;
    rows.push_back(r);
  };
  auto refine_with = [&](const TextureMap& tex, const ResidualMask& mask) {
    return refine_texture(tex, inpaint_ns(tex, mask, domain, params), mask, domain, params);
  };
  auto seed_fraction = [&](const ResidualMask& mask) {
    std::size_t n = std::count(mask.feather.begin(), mask.feather.end(), 1.0);
    return static_cast<double>(n) / static_cast<double>(std::max<std::size_t>(1, domain.inside_count()));
  };

  for (Method m : methods) {
    if (m == Method::Phase1) {
      const TextureMap coarse = read_png(dir / "coarse.png");
      if (!coarse.same_shape(gt)) fail(ErrorKind::BadInput, fmt::format("{}: coarse.png does not match gt.png", name));
      const CoverageMap cov = image_to_coverage(read_png(dir / "coverage.png"));
      if (cov.resolution != res) fail(ErrorKind::BadInput, fmt::format("{}: coverage.png does not match gt.png", name));
      Mask covered = cov.observed();
      for (std::size_t i = 0; i < covered.bits.size(); ++i) covered.bits[i] &= domain.inside.bits[i];
      const ResidualMask mask = residual_mask(cov, domain, params);
      const double frac = seed_fraction(mask);
      score(m, Stage::None, coarse, covered, frac, 0);
      score(m, Stage::Refined, refine_with(coarse, mask), covered, frac, 0);
    } else {
      const ViewLandmarks lm = load_view_landmarks(dir / "landmarks.json");
      const std::vector<Observation> views{load_view(dir, View::Front, lm.front, extent),
                                           load_view(dir, View::Back, lm.back, extent)};
      const TpsBake bake = tps_bake_texture(*mesh, views, res);
      Mask covered = domain.inside;
      for (std::size_t i = 0; i < covered.bits.size(); ++i) covered.bits[i] &= !bake.missing.bits[i];
      const ResidualMask mask = residual_from_holes(bake.missing, domain, params.dilation);
      const double frac = seed_fraction(mask);
      score(m, Stage::None, bake.texture, covered, frac, bake.landmark_count);
      score(m, Stage::Refined, refine_with(bake.texture, mask), covered, frac, bake.landmark_count);
    }
  }
  return rows;
}

}  // namespace

EvalReport evaluate(const fs::path& data_dir, const std::vector<Method>& methods, const RefineParams& params,
                    int workers) {
  params.validate();
  require(!methods.empty(), "no evaluation methods requested");
  std::vector<std::string> names;
  if (fs::exists(data_dir / "dataset.json")) {
    const nlohmann::json doc = read_json(data_dir / "dataset.json");
    for (const auto& s : doc.value("samples", nlohmann::json::array())) names.push_back(s.get<std::string>());
  } else if (fs::is_directory(data_dir)) {
    for (const auto& entry : fs::directory_iterator(data_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }
  if (names.empty()) fail(ErrorKind::BadInput, fmt::format("dataset {} is empty", data_dir.string()));

  std::vector<std::vector<EvalRow>> per_sample(names.size());
  std::vector<std::string> errors(names.size());
  std::map<std::string, TemplateAsset> cache;
  std::mutex cache_mutex;
  parallel_for(static_cast<int>(names.size()), worker_count(workers), [&](int i) {
    try {
      per_sample[i] = evaluate_sample(data_dir / names[i], names[i], methods, params, cache, cache_mutex);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  EvalReport report;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!errors[i].empty()) {
      report.failures.push_back({names[i], "", false, errors[i]});
      continue;
    }
    report.rows.insert(report.rows.end(), per_sample[i].begin(), per_sample[i].end());
  }
  if (report.rows.empty()) fail(ErrorKind::BadInput, "no dataset sample could be evaluated");
  for (Method m : methods) {
    for (Stage s : {Stage::None, Stage::Refined}) {
      EvalMean mean{m, s};
      for (const EvalRow& r : report.rows) {
        if (r.method != m || r.stage != s) continue;
        mean.ssim += r.ssim;
        mean.psnr += r.psnr;
        mean.ssim_covered += r.ssim_covered;
        ++mean.count;
      }
      if (mean.count > 0) {
        mean.ssim /= mean.count;
        mean.psnr /= mean.count;
        mean.ssim_covered /= mean.count;
      }
      report.means.push_back(mean);
    }
  }
  return report;
}

void write_report(const EvalReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.csv", report.csv());
  write_text(out_dir / "report.json", report.json());
}

}  // namespace gtex
