#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gtex/geometry.hpp"

namespace gtex {

/// A template mesh with its landmarks and blendshapes, as shipped on disk:
///
///   <dir>/template.obj        mesh with per-corner UVs
///   <dir>/landmarks.json      {"landmarks": {...}, "category": "..."}
///   <dir>/blendshapes/*.obj   delta OBJs, loaded in filename order
struct TemplateAsset {
  TemplateMesh mesh;
  BlendshapeSet blendshapes;
};

TemplateAsset load_template_asset(const std::filesystem::path& dir);
void save_template_asset(const std::filesystem::path& dir, const TemplateAsset& asset);

/// Resolves a template name ("tshirt") against the asset directory, or accepts a path.
std::filesystem::path resolve_template(const std::string& name_or_path);

/// Directory holding shipped templates. GTEX_ASSETS overrides the compiled-in default.
std::filesystem::path asset_dir();

// Procedural garments. Both are sewn from flat grid panels: seam vertices are
// duplicated per panel, front panels bulge towards +z and back panels towards
// -z, and the fabric wraps around the outer seams so that the band next to the
// outline is foreshortened in the catalog views. UV charts are the flat panel
// layout: front in the upper half of the atlas, back (mirrored) in the lower half.
// T-shirt sleeves are separate islands in the side margins.

/// T-shirt: torso, hem band and two sleeves per side; 8,523 vertices,
/// 16,039 faces, 14 landmarks, blendshapes sleeve_bend_left/right and hem_flare.
TemplateAsset make_tshirt_template();

/// Square pillow with no openings; 8 landmarks and one mild shear blendshape.
TemplateAsset make_quad_template();

/// Landmark names observable in a view (those with a vertex copy on that view's faces).
std::vector<std::string> landmarks_in_view(const TemplateMesh& mesh, View view);

}  // namespace gtex
