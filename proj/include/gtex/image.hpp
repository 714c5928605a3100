#pragma once

#include <span>
#include <vector>

namespace gtex {

/// Row-major floating image, channel-interleaved. Row 0 is the top row.
///
/// Values passed through the data constructor are clamped to [0,1]; the
/// mutable accessors do not clamp, so code writing intermediate results
/// should call clamp() before handing the image on.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& operator()(int x, int y, int c = 0) { return values_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const { return values_[index(x, y, c)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  void clamp();
  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  /// Single channel copy (channel mean for RGB).
  Image to_gray() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

/// Square 3-channel texel grid. Texel (c, r) has UV centre ((c+0.5)/R, 1-(r+0.5)/R).
using TextureMap = Image;

void require_texture(const Image& texture);

/// Boolean grid helper shared by domain, hole and coverage masks.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> bits;

  Mask() = default;
  Mask(int w, int h, bool fill = false) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}
  bool operator()(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v; }
  std::size_t count() const;
  bool operator==(const Mask&) const = default;
};

/// Image of the mask (1 channel, 0/1).
Image mask_to_image(const Mask& mask);
/// Threshold at 0.5 (channel mean for RGB).
Mask image_to_mask(const Image& image, double threshold = 0.5);

}  // namespace gtex
