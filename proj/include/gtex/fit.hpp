#pragma once

#include <map>
#include <string>
#include <vector>

#include "gtex/config.hpp"
#include "gtex/defgraph.hpp"
#include "gtex/error.hpp"
#include "gtex/garment.hpp"
#include "gtex/render.hpp"

namespace gtex {

/// One catalog view: a pre-masked RGB image, its silhouette, 2D landmarks in
/// pixels and the camera it was taken with.
struct Observation {
  Image image;
  Image silhouette;
  std::map<std::string, Vec2> landmarks;
  Camera camera;

  /// Checks shapes, value ranges and that every landmark name exists on the mesh.
  void validate(const TemplateMesh& mesh) const;
};

/// Per-step energies. Stage 1 fills the shape terms, stage 2 the image terms;
/// unused terms stay 0. Values are unweighted; `total` is the weighted sum.
struct TraceRow {
  int stage = 1;
  int step = 0;
  double total = 0.0;
  double sil = 0.0;
  double lmk = 0.0;
  double arap = 0.0;
  double norm = 0.0;
  double img = 0.0;
  double tv = 0.0;
};

/// Thrown when an energy becomes non-finite; carries the trace so far.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<TraceRow> trace)
      : Error(ErrorKind::Numerical, what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

struct ShapeFit {
  std::vector<Vec3> vertices;
  GraphParams params;
  std::vector<TraceRow> trace;
};

struct TextureFit {
  TextureMap texture;
  CoverageMap coverage;
  std::vector<TraceRow> trace;
};

struct FitResult {
  std::vector<Vec3> vertices;
  GraphParams params;
  double scale = 1.0;
  TextureMap coarse;
  CoverageMap coverage;
  std::vector<TraceRow> trace;
};

/// Centre about which auto_scale scales the template: its bounding-box centre.
Vec3 scale_center(std::span<const Vec3> vertices);
std::vector<Vec3> scale_vertices(std::span<const Vec3> vertices, double scale, const Vec3& center);

/// Sweeps scale_min..scale_max in scale_step increments and returns the scale
/// whose hard silhouette has the highest IoU with the target (binarized at
/// 0.5). Ties go to the smaller scale.
double auto_scale(const TemplateMesh& mesh, const Observation& front, const FitConfig& config);

/// Hard-mask IoU of two single-channel images binarized at 0.5.
double mask_iou(const Image& a, const Image& b);

/// Stage 1: Adam over graph parameters on w_sil E_sil + w_lmk E_lmk + w_arap E_arap
/// + w_norm E_norm, with the ARAP and normal weights on a cosine decay.
ShapeFit fit_shape(const TemplateMesh& mesh, std::span<const Vec3> rest, const DeformationGraph& graph,
                   std::span<const Observation> views, const FitConfig& config);

/// Stage 2: Adam over texels with the geometry frozen, starting from mid-gray.
/// Texels outside the UV domain are zeroed.
TextureFit recover_texture(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                           std::span<const Observation> views, const FitConfig& config);

/// auto_scale, fit_shape and recover_texture in sequence. Needs one front and one back view.
FitResult phase1(const TemplateMesh& mesh, std::span<const Observation> views, const FitConfig& config);

/// Landmark pixel positions of `vertices` seen by `camera`, for the named landmarks.
std::map<std::string, Vec2> project_landmarks(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                                              const Camera& camera, const std::vector<std::string>& names);

}  // namespace gtex

namespace gtex {

/// {"front": {"name": [x, y], ...}, "back": {...}} in pixels.
struct ViewLandmarks {
  std::map<std::string, Vec2> front;
  std::map<std::string, Vec2> back;
};
ViewLandmarks load_view_landmarks(const std::filesystem::path& path);
void save_view_landmarks(const std::filesystem::path& path, const ViewLandmarks& landmarks);

/// Per-step energies as CSV with a header row.
std::string format_trace_csv(const std::vector<TraceRow>& trace);

}  // namespace gtex
