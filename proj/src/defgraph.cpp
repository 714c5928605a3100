#include "gtex/defgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "gtex/error.hpp"
#include "gtex/rotation.hpp"

namespace gtex {

RodriguesCoeffs rodrigues_coeffs(double phi) {
  if (phi < 1e-2) {
    const double p2 = phi * phi;
    const double p4 = p2 * p2;
    return {1.0 - p2 / 6.0 + p4 / 120.0, 0.5 - p2 / 24.0 + p4 / 720.0, -1.0 / 3.0 + p2 / 30.0 - p4 / 840.0,
            -1.0 / 12.0 + p2 / 180.0 - p4 / 6720.0};
  }
  const double s = std::sin(phi);
  const double c = std::cos(phi);
  const double p2 = phi * phi;
  return {s / phi, (1.0 - c) / p2, (phi * c - s) / (p2 * phi), (phi * s - 2.0 * (1.0 - c)) / (p2 * p2)};
}

Mat3 axis_angle_matrix(const Vec3& w) {
  const RodriguesCoeffs k = rodrigues_coeffs(w.norm());
  const Mat3 W = skew(w);
  return Mat3::Identity() + k.a * W + k.b * W * W;
}

Mat3 rotate_jacobian(const Vec3& w, const Vec3& u) {
  const RodriguesCoeffs k = rodrigues_coeffs(w.norm());
  const Vec3 wu = w.cross(u);
  const Vec3 wwu = w.cross(wu);
  return k.da_over_phi * wu * w.transpose() - k.a * skew(u) + k.db_over_phi * wwu * w.transpose() -
         k.b * (skew(wu) + skew(w) * skew(u));
}

DeformationGraph DeformationGraph::scaled(double scale, const Vec3& center) const {
  DeformationGraph out = *this;
  for (Vec3& g : out.nodes) g = center + scale * (g - center);
  return out;
}

GraphParams GraphParams::identity(int nodes) {
  return {std::vector<Vec3>(nodes, Vec3::Zero()), std::vector<Vec3>(nodes, Vec3::Zero())};
}

std::vector<double> GraphParams::flatten() const {
  std::vector<double> flat(flat_size());
  for (std::size_t i = 0; i < translations.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      flat[6 * i + c] = axis_angles[i][c];
      flat[6 * i + 3 + c] = translations[i][c];
    }
  }
  return flat;
}

GraphParams GraphParams::unflatten(std::span<const double> flat) {
  require(flat.size() % 6 == 0, "flat graph parameters must hold 6 values per node");
  const int n = static_cast<int>(flat.size() / 6);
  GraphParams p = identity(n);
  for (int i = 0; i < n; ++i) {
    p.axis_angles[i] = Vec3(flat[6 * i], flat[6 * i + 1], flat[6 * i + 2]);
    p.translations[i] = Vec3(flat[6 * i + 3], flat[6 * i + 4], flat[6 * i + 5]);
  }
  return p;
}

GraphParams& GraphParams::operator+=(const GraphParams& other) {
  require(other.node_count() == node_count(), "graph parameter size mismatch");
  for (int i = 0; i < node_count(); ++i) {
    axis_angles[i] += other.axis_angles[i];
    translations[i] += other.translations[i];
  }
  return *this;
}

DeformationGraph build_graph(const TemplateMesh& mesh, const GraphOptions& options) {
  return build_graph(mesh.vertices, options);
}

DeformationGraph build_graph(std::span<const Vec3> vertices, const GraphOptions& options) {
  const int nv = static_cast<int>(vertices.size());
  require(options.downsample_factor >= 2, "downsample factor must be at least 2");
  if (nv < options.downsample_factor) {
    fail(ErrorKind::InvalidArgument,
         fmt::format("{} vertices are too few for downsample factor {}", nv, options.downsample_factor));
  }
  require(options.node_neighbor_count >= 1 && options.skin_node_count >= 1, "graph neighbourhoods must be non-empty");

  const int k = (nv + options.downsample_factor - 1) / options.downsample_factor;
  DeformationGraph graph;
  graph.downsample_factor = options.downsample_factor;

  // Farthest-point sampling, seeded at vertex 0, ties to the lowest index.
  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  int current = 0;
  for (int n = 0; n < k; ++n) {
    graph.nodes.push_back(vertices[current]);
    int next = 0;
    double far = -1.0;
    for (int v = 0; v < nv; ++v) {
      dist[v] = std::min(dist[v], (vertices[v] - vertices[current]).squaredNorm());
      if (dist[v] > far) {
        far = dist[v];
        next = v;
      }
    }
    current = next;
  }

  std::vector<int> order(k);
  auto sort_by_distance = [&](const Vec3& p, int keep) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](int a, int b) {
      const double da = (graph.nodes[a] - p).squaredNorm();
      const double db = (graph.nodes[b] - p).squaredNorm();
      return da != db ? da < db : a < b;
    });
  };

  const int neighbor_count = std::min(options.node_neighbor_count, k - 1);
  graph.neighbors.resize(k);
  for (int n = 0; n < k && neighbor_count > 0; ++n) {
    sort_by_distance(graph.nodes[n], neighbor_count + 1);
    for (int m = 0; m <= neighbor_count && static_cast<int>(graph.neighbors[n].size()) < neighbor_count; ++m) {
      if (order[m] != n) graph.neighbors[n].push_back(order[m]);
    }
  }

  // Skin over the K nearest nodes; the (K+1)-th sets the falloff radius.
  const int skin = k == 1 ? 1 : std::min(options.skin_node_count, k - 1);
  graph.skin_count = skin;
  graph.skin_nodes.resize(static_cast<std::size_t>(nv) * skin);
  graph.skin_weights.resize(static_cast<std::size_t>(nv) * skin);
  for (int v = 0; v < nv; ++v) {
    const std::size_t row = static_cast<std::size_t>(v) * skin;
    if (k == 1) {
      graph.skin_nodes[row] = 0;
      graph.skin_weights[row] = 1.0;
      continue;
    }
    sort_by_distance(vertices[v], skin + 1);
    const double dmax = (graph.nodes[order[skin]] - vertices[v]).norm();
    double total = 0.0;
    for (int s = 0; s < skin; ++s) {
      const double d = (graph.nodes[order[s]] - vertices[v]).norm();
      const double w = dmax > 0.0 ? std::pow(1.0 - d / dmax, 2) : 0.0;
      graph.skin_nodes[row + s] = order[s];
      graph.skin_weights[row + s] = w;
      total += w;
    }
    for (int s = 0; s < skin; ++s) {
      graph.skin_weights[row + s] = total > 0.0 ? graph.skin_weights[row + s] / total : 1.0 / skin;
    }
  }
  return graph;
}

namespace {

void check_sizes(std::span<const Vec3> rest, const DeformationGraph& graph, const GraphParams& params) {
  if (params.node_count() != graph.node_count() || params.axis_angles.size() != params.translations.size()) {
    fail(ErrorKind::InvalidArgument, fmt::format("graph has {} nodes but parameters hold {}", graph.node_count(),
                                                 params.node_count()));
  }
  require(static_cast<int>(rest.size()) == graph.vertex_count(), "rest vertices do not match the graph skinning");
}

}  // namespace

std::vector<Vec3> deform(std::span<const Vec3> rest, const DeformationGraph& graph, const GraphParams& params) {
  check_sizes(rest, graph, params);
  std::vector<Mat3> rot(graph.node_count());
  for (int i = 0; i < graph.node_count(); ++i) rot[i] = axis_angle_matrix(params.axis_angles[i]);

  std::vector<Vec3> out(rest.size());
  const int skin = graph.skin_count;
  for (std::size_t v = 0; v < rest.size(); ++v) {
    Vec3 acc = Vec3::Zero();
    for (int s = 0; s < skin; ++s) {
      const int i = graph.skin_nodes[v * skin + s];
      const double w = graph.skin_weights[v * skin + s];
      const Vec3& g = graph.nodes[i];
      acc += w * (rot[i] * (rest[v] - g) + g + params.translations[i]);
    }
    out[v] = acc;
  }
  return out;
}

GraphParams deform_backward(std::span<const Vec3> rest, const DeformationGraph& graph, const GraphParams& params,
                            std::span<const Vec3> vertex_grad) {
  check_sizes(rest, graph, params);
  require(vertex_grad.size() == rest.size(), "vertex gradient size mismatch");
  GraphParams grad = GraphParams::identity(graph.node_count());
  const int skin = graph.skin_count;
  for (std::size_t v = 0; v < rest.size(); ++v) {
    const Vec3& g_v = vertex_grad[v];
    if (g_v.isZero(0.0)) continue;
    for (int s = 0; s < skin; ++s) {
      const int i = graph.skin_nodes[v * skin + s];
      const double w = graph.skin_weights[v * skin + s];
      grad.translations[i] += w * g_v;
      grad.axis_angles[i] += w * rotate_jacobian(params.axis_angles[i], rest[v] - graph.nodes[i]).transpose() * g_v;
    }
  }
  return grad;
}

ArapResult e_arap(const DeformationGraph& graph, const GraphParams& params) {
  require(params.node_count() == graph.node_count(), "graph parameter size mismatch");
  ArapResult out;
  out.gradient = GraphParams::identity(graph.node_count());
  std::size_t pairs = 0;
  for (const auto& nb : graph.neighbors) pairs += nb.size();
  if (pairs == 0) return out;
  const double inv = 1.0 / static_cast<double>(pairs);

  for (int j = 0; j < graph.node_count(); ++j) {
    const Mat3 R = axis_angle_matrix(params.axis_angles[j]);
    for (int k : graph.neighbors[j]) {
      const Vec3 d = graph.nodes[k] - graph.nodes[j];
      const Vec3 r = R * d + graph.nodes[j] + params.translations[j] - graph.nodes[k] - params.translations[k];
      out.energy += r.squaredNorm() * inv;
      const Vec3 g = 2.0 * inv * r;
      out.gradient.translations[j] += g;
      out.gradient.translations[k] -= g;
      out.gradient.axis_angles[j] += rotate_jacobian(params.axis_angles[j], d).transpose() * g;
    }
  }
  return out;
}

}  // namespace gtex
