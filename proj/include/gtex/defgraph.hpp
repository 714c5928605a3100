#pragma once

#include <span>
#include <vector>

#include "gtex/geometry.hpp"

namespace gtex {

/// Embedded deformation graph: sparse nodes whose rigid transforms are
/// blended onto mesh vertices.
struct DeformationGraph {
  std::vector<Vec3> nodes;
  std::vector<std::vector<int>> neighbors;
  /// skin_count entries per vertex, row-major by vertex.
  int skin_count = 0;
  std::vector<int> skin_nodes;
  std::vector<double> skin_weights;
  int downsample_factor = 0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int vertex_count() const { return skin_count == 0 ? 0 : static_cast<int>(skin_nodes.size()) / skin_count; }

  /// Same graph after scaling the embedding space about `center`. Skin weights
  /// depend only on distance ratios, so only node positions change.
  DeformationGraph scaled(double scale, const Vec3& center) const;
};

/// Per-node axis-angle rotation (radians) and translation (model units).
/// Also used as the gradient type for the same parameters.
struct GraphParams {
  std::vector<Vec3> axis_angles;
  std::vector<Vec3> translations;

  static GraphParams identity(int nodes);
  int node_count() const { return static_cast<int>(translations.size()); }
  std::size_t flat_size() const { return 6 * translations.size(); }

  /// Flat layout [A_0, T_0, A_1, T_1, ...], for optimizers.
  std::vector<double> flatten() const;
  static GraphParams unflatten(std::span<const double> flat);
  GraphParams& operator+=(const GraphParams& other);
};

struct GraphOptions {
  int downsample_factor = 20;
  int node_neighbor_count = 6;
  int skin_node_count = 4;
};

/// Farthest-point samples ceil(V / factor) nodes starting at vertex 0.
DeformationGraph build_graph(const TemplateMesh& mesh, const GraphOptions& options = {});
DeformationGraph build_graph(std::span<const Vec3> vertices, const GraphOptions& options = {});

/// v' = sum_i w_i(v) [R(A_i)(v - g_i) + g_i + T_i]
std::vector<Vec3> deform(std::span<const Vec3> rest, const DeformationGraph& graph, const GraphParams& params);
inline std::vector<Vec3> deform(const TemplateMesh& mesh, const DeformationGraph& graph, const GraphParams& params) {
  return deform(mesh.vertices, graph, params);
}

/// Pulls a gradient w.r.t. deformed vertices back onto the graph parameters.
GraphParams deform_backward(std::span<const Vec3> rest, const DeformationGraph& graph, const GraphParams& params,
                            std::span<const Vec3> vertex_grad);

struct ArapResult {
  double energy = 0.0;
  GraphParams gradient;
};

/// Mean over directed neighbour pairs (j, k) of
/// ||R(A_j)(g_k - g_j) + g_j + T_j - (g_k + T_k)||^2.
ArapResult e_arap(const DeformationGraph& graph, const GraphParams& params);

}  // namespace gtex
