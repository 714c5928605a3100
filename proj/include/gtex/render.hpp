#pragma once

#include <span>
#include <vector>

#include "gtex/geometry.hpp"
#include "gtex/image.hpp"

namespace gtex {

/// Orthographic catalog camera. The front camera looks along -z; the back
/// camera looks along +z with x mirrored, so both images read as a shopper
/// would see the garment. Image row 0 is at +world_extent in y.
struct Camera {
  View view = View::Front;
  double world_extent = 1.0;
  int image_size = 512;

  void validate() const;
  double x_sign() const { return view == View::Front ? 1.0 : -1.0; }
  /// d(pixel)/d(model unit) along x and y.
  double scale_x() const { return x_sign() * image_size / (2.0 * world_extent); }
  double scale_y() const { return -image_size / (2.0 * world_extent); }

  Vec2 project(const Vec3& p) const {
    return {(x_sign() * p.x() / world_extent + 1.0) * 0.5 * image_size,
            (1.0 - p.y() / world_extent) * 0.5 * image_size};
  }
  /// Larger is nearer to the camera.
  double depth(const Vec3& p) const { return view == View::Front ? p.z() : -p.z(); }
};

std::vector<Vec2> project(const Camera& camera, std::span<const Vec3> points);

// ---- soft silhouette ----

/// Forward result of the soft rasterizer. `log_transmit` holds
/// sum_j log(1 - D_j) per pixel, kept for a stable backward pass.
struct SoftSilhouette {
  Image image;
  std::vector<double> log_transmit;
};

/// S(p) = 1 - prod_j (1 - sigmoid(sign_j d_j^2 / sigma)), with d_j the distance
/// from the pixel centre to triangle j in normalized device units (the image
/// spans [-1, 1]). Faces whose contribution is below ~1e-9 are skipped.
SoftSilhouette render_silhouette(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera,
                                 double sigma = 1e-4);

/// Vertex gradient of sum_p grad(p) * S(p).
std::vector<Vec3> render_silhouette_backward(std::span<const Vec3> vertices, std::span<const Face> faces,
                                             const Camera& camera, double sigma, const SoftSilhouette& forward,
                                             const Image& grad);

// ---- hard rasterization ----

/// Per-pixel nearest face at the pixel centre, -1 for background.
struct Fragments {
  int size = 0;
  std::vector<int> face;
  std::vector<Vec3> bary;

  bool covered(std::size_t pixel) const { return face[pixel] >= 0; }
};

Fragments rasterize(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera);

/// Binary silhouette from a hard rasterization.
Image hard_silhouette(std::span<const Vec3> vertices, std::span<const Face> faces, const Camera& camera);

/// Sparse linear map from a texture (R x R x 3) to an image (S x S x 3): each
/// covered pixel takes a bilinear sample of the texture at its interpolated UV.
class SamplingOperator {
 public:
  struct Tap {
    int texel;
    double weight;
  };

  SamplingOperator() = default;
  SamplingOperator(const TemplateMesh& mesh, const Fragments& fragments, int texture_resolution);

  int image_size() const { return image_size_; }
  int texture_resolution() const { return resolution_; }
  bool covered(int pixel) const { return start_[pixel] != start_[pixel + 1]; }
  std::span<const Tap> taps(int pixel) const {
    return {taps_.data() + start_[pixel], taps_.data() + start_[pixel + 1]};
  }

  /// Renders a texture. Uncovered pixels are 0.
  Image apply(const TextureMap& texture) const;
  /// Transpose of apply: scatters image values back onto texels.
  TextureMap adjoint(const Image& image) const;

 private:
  int image_size_ = 0;
  int resolution_ = 0;
  std::vector<int> start_;
  std::vector<Tap> taps_;
};

/// Bilinear texel taps for a UV coordinate; texel centres sit at ((c+0.5)/R, 1-(r+0.5)/R).
void bilinear_taps(const Vec2& uv, int resolution, std::array<SamplingOperator::Tap, 4>& taps);

/// Emission-only render: pixel colour is the bilinear texture sample, background 0.
Image render_textured(const TemplateMesh& mesh, std::span<const Vec3> vertices, const TextureMap& texture,
                      const Camera& camera);

/// Per-texel accumulated sampling weight of visible pixels, row-major like a texture.
struct CoverageMap {
  int resolution = 0;
  std::vector<double> weight;

  double operator()(int x, int y) const { return weight[static_cast<std::size_t>(y) * resolution + x]; }
  double& operator()(int x, int y) { return weight[static_cast<std::size_t>(y) * resolution + x]; }
  /// Texels with nonzero weight.
  Mask observed() const;
};

/// Accumulated bilinear sampling weight per texel over all cameras' visible
/// pixels. Texels outside the UV domain are forced to 0.
CoverageMap texel_coverage(const TemplateMesh& mesh, std::span<const Vec3> vertices, std::span<const Camera> cameras,
                     int resolution);

}  // namespace gtex
