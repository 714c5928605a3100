#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gtex {

/// Phase I settings. Defaults are the full profile: published energy weights
/// and decay targets, 1,000 + 1,000 steps, 512^2 renders.
struct FitConfig {
  double w_sil = 50.0;
  double w_lmk = 0.01;
  double w_arap = 50.0;
  double w_arap_end = 5.0;
  double w_norm = 10.0;
  double w_norm_end = 1.0;
  double w_img = 100.0;
  double w_tv = 1.0;
  /// Optional TV on the texture itself (UV space); off by default.
  double w_tv_uv = 0.0;
  int steps_stage1 = 1000;
  int steps_stage2 = 1000;
  double lr_shape = 5e-3;
  double lr_texture = 5e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sigma = 1e-4;
  int image_size = 512;
  int texture_resolution = 512;
  double world_extent = 1.2;
  int downsample_factor = 20;
  int node_neighbors = 6;
  int skin_nodes = 4;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double scale_step = 0.02;

  /// 128^2 renders, 256^2 textures, 300 + 300 steps, sigma 1e-5, UV TV 0.5.
  static FitConfig desk();
  void validate() const;
};

/// Phase II settings.
struct RefineParams {
  /// Coverage threshold as a fraction of the mean nonzero coverage weight.
  double coverage_fraction = 0.01;
  int dilation = 2;
  int ns_iterations = 300;
  double ns_step = 0.1;
  /// Blend between isophote transport (1) and isotropic diffusion (0).
  double ns_transport = 0.5;
  int bilateral_window = 7;
  double sigma_spatial = 3.0;
  double sigma_range = 0.1;

  void validate() const;
};

struct PipelineConfig {
  FitConfig fit;
  RefineParams refine;
};

/// Flat `key = value` text. `#` starts a comment. Missing keys keep their
/// values from `base`; unknown keys, duplicates and malformed values are errors.
PipelineConfig parse_config(std::string_view text, const std::string& source_name = "<memory>",
                            const PipelineConfig& base = {});
PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base = {});
/// Applies one `key=value` override in place.
void apply_override(PipelineConfig& config, std::string_view assignment);
/// Every key, one per line, in a fixed order; parse_config(dump_config(c)) == c.
std::string dump_config(const PipelineConfig& config);

}  // namespace gtex
