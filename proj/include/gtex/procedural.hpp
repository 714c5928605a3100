#pragma once

#include <cstdint>
#include <string>

#include "gtex/geometry.hpp"
#include "gtex/image.hpp"

namespace gtex {

enum class RecipeKind { Stripes, Checker, Gradient, Blobs, Mixed };

/// A texture recipe. `param` fixes the recipe's main count (stripe count,
/// checker cells, blob count); 0 draws it from the seed.
struct Recipe {
  RecipeKind kind = RecipeKind::Mixed;
  int param = 0;
};

/// "stripes", "checker", "gradient", "blobs", "mixed", optionally ":N" for the parameter.
Recipe parse_recipe(const std::string& text);
std::string to_string(const Recipe& recipe);

/// Deterministic in (recipe, resolution, seed). With a domain, texels outside it are 0.
TextureMap gen_texture(const Recipe& recipe, int resolution, std::uint64_t seed, const DomainMask* domain = nullptr);

/// Seed for sample `index` of a run seeded with `seed` (SplitMix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace gtex
