#include <cstdio>
#include <filesystem>

#include "gtex/error.hpp"
#include "gtex/garment.hpp"

// Regenerates the shipped procedural templates under <dir>/templates.
int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : gtex::asset_dir();
  try {
    gtex::save_template_asset(root / "templates" / "tshirt", gtex::make_tshirt_template());
    gtex::save_template_asset(root / "templates" / "quad", gtex::make_quad_template());
  } catch (const gtex::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
