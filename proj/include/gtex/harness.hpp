#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gtex/config.hpp"
#include "gtex/fit.hpp"
#include "gtex/procedural.hpp"

namespace gtex {

/// Synthetic corpus description. Text form is flat `key = value` like the fit
/// config; `templates` is a comma-separated list of names or paths.
struct SimSpec {
  std::vector<std::string> templates{"tshirt"};
  int samples = 1;  // per template
  Recipe recipe;
  double coeff_lo = 0.1;
  double coeff_hi = 1.0;
  int image_size = 128;
  int texture_resolution = 256;
  double world_extent = 1.2;
  std::uint64_t seed = 0;

  void validate() const;
};

SimSpec parse_sim_spec(std::string_view text, const std::string& source_name = "<memory>");
SimSpec load_sim_spec(const std::filesystem::path& path);
std::string dump_sim_spec(const SimSpec& spec);

/// Worker count: `requested` if positive, else GTEX_WORKERS, else hardware concurrency.
int worker_count(int requested = 0);

/// Runs body(i) for i in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& body);

/// Cameras for a catalog pair.
std::vector<Camera> catalog_cameras(double world_extent, int image_size);

/// Renders front and back observations of a posed mesh: emission-only colour,
/// hard silhouettes and the landmarks visible in each view.
std::vector<Observation> render_observations(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                                             const TextureMap& texture, double world_extent, int image_size);

struct SampleRecord {
  std::string name;
  std::string template_name;
  bool ok = false;
  std::string error;
};

struct SimSummary {
  std::vector<SampleRecord> samples;
  int failed() const;
};

/// Per sample: draw a texture and blendshape coefficients, render both views,
/// run phase1 and write
///   <out>/sample_NNNN/{gt,front,back,mask_front,mask_back,coarse,coverage}.png,
///   landmarks.json and meta.json,
/// plus <out>/dataset.json. Failed samples are logged there and skipped.
SimSummary simulate_pairs(const SimSpec& spec, const FitConfig& config, const std::filesystem::path& out_dir,
                          int workers = 0);

enum class Method { Tps, Phase1 };
enum class Stage { None, Refined };
const char* to_string(Method m);
const char* to_string(Stage s);

struct EvalRow {
  std::string sample;
  std::string template_name;
  Method method = Method::Phase1;
  Stage stage = Stage::None;
  double ssim = 0.0;          // over domain texels
  double psnr = 0.0;          // over domain texels
  double ssim_covered = 0.0;  // over observed domain texels
  double hole_fraction = 0.0;
  int landmark_count = 0;
};

struct EvalMean {
  Method method;
  Stage stage;
  double ssim = 0.0;
  double psnr = 0.0;
  double ssim_covered = 0.0;
  int count = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalMean> means;
  std::vector<SampleRecord> failures;

  const EvalMean* find(Method m, Stage s) const;
  std::string csv() const;
  std::string json() const;
};

/// Scores the requested methods (each with and without refinement) against
/// gt.png over the UV domain, averaging per method and stage.
EvalReport evaluate(const std::filesystem::path& data_dir, const std::vector<Method>& methods,
                    const RefineParams& params, int workers = 0);

/// Writes report.csv and report.json.
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

/// Coverage as 16-bit-friendly image: weight / max, nonzero weights kept >= 1/65535.
Image coverage_to_image(const CoverageMap& coverage);
CoverageMap image_to_coverage(const Image& image);

}  // namespace gtex
