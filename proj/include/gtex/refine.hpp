#pragma once

#include <vector>

#include "gtex/config.hpp"
#include "gtex/geometry.hpp"
#include "gtex/render.hpp"

namespace gtex {

/// Texels to inpaint (M_r) with a blend weight. `feather` is 1 on the
/// undilated holes, ramps down linearly across the dilation ring and is 0
/// elsewhere; `hole` is the dilated set.
struct ResidualMask {
  int resolution = 0;
  Mask hole;
  std::vector<double> feather;

  double fraction(const DomainMask& domain) const;
};

/// Dilates `seed` (restricted to the domain) by `radius` texels (chessboard
/// distance) and builds the feather ramp 1 - k / (radius + 1) at distance k.
ResidualMask residual_from_holes(const Mask& seed, const DomainMask& domain, int radius);

/// Holes are domain texels whose coverage weight is below
/// coverage_fraction x (mean nonzero weight).
ResidualMask residual_mask(const CoverageMap& coverage, const DomainMask& domain, const RefineParams& params);

/// Navier-Stokes style fill restricted to the UV domain: onion-peel start,
/// then explicit steps mixing transport of the Laplacian along isophotes with
/// isotropic diffusion. Only hole texels are written and only domain texels read.
TextureMap inpaint_ns(const TextureMap& texture, const ResidualMask& mask, const DomainMask& domain,
                      const RefineParams& params);

/// Bilateral filter with a square window. With a domain, only domain pixels
/// are filtered and only domain pixels contribute; others are copied.
Image bilateral(const Image& image, const RefineParams& params, const Mask* domain = nullptr);

/// T_fine = bilateral((1 - feather) T_coarse + feather T_o) on the domain, 0 elsewhere.
TextureMap refine_texture(const TextureMap& coarse, const TextureMap& inpainted, const ResidualMask& mask,
                          const DomainMask& domain, const RefineParams& params);

}  // namespace gtex
