#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gtex/geometry.hpp"
#include "gtex/image.hpp"

namespace gtex {

struct PointEnergy {
  double value = 0.0;
  std::vector<Vec2> grad;
};

struct VertexEnergy {
  double value = 0.0;
  std::vector<Vec3> grad;
};

struct ImageEnergy {
  double value = 0.0;
  Image grad;
};

/// Mean distance between projected and detected landmarks, measured in units
/// of the image size.
PointEnergy e_lmk(std::span<const Vec2> projected, std::span<const Vec2> targets, int image_size);

/// Soft IoU loss 1 - sum(ab) / sum(a + b - ab), gradient w.r.t. `rendered`.
/// An empty union is defined as loss 0.
ImageEnergy e_sil(const Image& rendered, const Image& target);

/// Mean over adjacent face pairs of 1 - cos(angle between face normals).
VertexEnergy e_norm(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                    std::span<const std::pair<int, int>> pairs);
VertexEnergy e_norm(const TemplateMesh& mesh, std::span<const Vec3> vertices);

/// Anisotropic-by-axis TV: mean_x ||I(x+1,y) - I(x,y)|| + mean_y ||I(x,y+1) - I(x,y)||,
/// norms over channels. With a mask, only differences between two masked
/// pixels count; the normalization is unchanged.
ImageEnergy e_tv(const Image& image, const Mask* mask = nullptr);

/// Adaptive-moment gradient descent over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  int iterations() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

/// w(t) = end + (start - end) (1 + cos(pi t / steps)) / 2
double cosine_decay(double start, double end, int step, int steps);

}  // namespace gtex
