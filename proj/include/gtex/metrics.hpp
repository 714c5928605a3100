#pragma once

#include "gtex/image.hpp"

namespace gtex {

/// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1,
/// population statistics, evaluated where the window fits inside the image
/// and averaged over channels. Images must be at least 11x11.
double ssim(const Image& a, const Image& b);

/// Channel-averaged SSIM map, full image size. Pixels within 5 of the border are 0.
Image ssim_map(const Image& a, const Image& b);

/// Mean of the SSIM map over mask pixels whose window fits inside the image.
/// Returns 1 when no such pixel exists.
double ssim_masked(const Image& a, const Image& b, const Mask& mask);

/// 10 log10(1 / MSE); +infinity for identical inputs.
double psnr(const Image& a, const Image& b);
double psnr_masked(const Image& a, const Image& b, const Mask& mask);

}  // namespace gtex
