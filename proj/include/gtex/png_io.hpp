#pragma once

#include <filesystem>

#include "gtex/image.hpp"

namespace gtex {

// Values map linearly between [0,1] and the integer range; no gamma handling.

/// Reads 8- or 16-bit gray, gray+alpha, RGB or RGBA. Alpha is dropped.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit gray (1 channel) or RGB (3 channels).
void write_png(const std::filesystem::path& path, const Image& image);

/// Writes 16-bit gray. Used for coverage maps, where small weights must survive.
void write_png16(const std::filesystem::path& path, const Image& image);

}  // namespace gtex
