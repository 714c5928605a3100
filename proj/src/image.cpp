#include "gtex/image.hpp"

#include <algorithm>

#include "gtex/error.hpp"

namespace gtex {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels),
      values_(static_cast<std::size_t>(width) * height * channels, std::clamp(fill, 0.0, 1.0)) {
  require(width >= 0 && height >= 0 && (channels == 1 || channels == 3),
          "image needs non-negative size and 1 or 3 channels");
}

Image::Image(int width, int height, int channels, std::vector<double> values)
    : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
  require(width >= 0 && height >= 0 && (channels == 1 || channels == 3),
          "image needs non-negative size and 1 or 3 channels");
  require(values_.size() == static_cast<std::size_t>(width) * height * channels,
          "image value count does not match its shape");
  clamp();
}

void Image::clamp() {
  for (double& v : values_) v = std::clamp(v, 0.0, 1.0);
}

Image Image::to_gray() const {
  if (channels_ == 1) return *this;
  Image out(width_, height_, 1);
  for (std::size_t p = 0; p < pixel_count(); ++p) {
    out.values_[p] = (values_[3 * p] + values_[3 * p + 1] + values_[3 * p + 2]) / 3.0;
  }
  return out;
}

void require_texture(const Image& texture) {
  require(texture.channels() == 3 && texture.width() == texture.height() && texture.width() > 0,
          "texture maps must be square with 3 channels");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

Image mask_to_image(const Mask& mask) {
  Image out(mask.width, mask.height, 1);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) out.values()[i] = mask.bits[i] ? 1.0 : 0.0;
  return out;
}

Mask image_to_mask(const Image& image, double threshold) {
  const Image gray = image.to_gray();
  Mask out(gray.width(), gray.height());
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = gray.values()[i] >= threshold;
  return out;
}

}  // namespace gtex
