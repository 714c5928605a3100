#include <fmt/core.h>

#include "gtex/error.hpp"
#include "gtex/render.hpp"

namespace gtex {

void Camera::validate() const {
  if (!(world_extent > 0.0)) fail(ErrorKind::InvalidArgument, fmt::format("camera extent {} must be positive", world_extent));
  if (image_size < 16) fail(ErrorKind::InvalidArgument, fmt::format("image size {} is below 16", image_size));
}

std::vector<Vec2> project(const Camera& camera, std::span<const Vec3> points) {
  std::vector<Vec2> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = camera.project(points[i]);
  return out;
}

}  // namespace gtex
