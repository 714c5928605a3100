#include "gtex/fit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "gtex/energies.hpp"

namespace gtex {

void Observation::validate(const TemplateMesh& mesh) const {
  camera.validate();
  const int n = camera.image_size;
  if (image.width() != n || image.height() != n || image.channels() != 3) {
    fail(ErrorKind::BadInput, fmt::format("observation image must be {}x{} RGB", n, n));
  }
  if (silhouette.width() != n || silhouette.height() != n || silhouette.channels() != 1) {
    fail(ErrorKind::BadInput, fmt::format("observation silhouette must be {}x{} single-channel", n, n));
  }
  for (double v : silhouette.values()) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::BadInput, "silhouette values must lie in [0, 1]");
  }
  for (const auto& [name, p] : landmarks) {
    if (!mesh.landmarks.contains(name)) fail(ErrorKind::BadInput, fmt::format("unknown landmark '{}'", name));
    if (!p.allFinite()) fail(ErrorKind::BadInput, fmt::format("landmark '{}' is not finite", name));
  }
}

Vec3 scale_center(std::span<const Vec3> vertices) {
  require(!vertices.empty(), "no vertices");
  Vec3 lo = vertices[0], hi = vertices[0];
  for (const Vec3& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return 0.5 * (lo + hi);
}

std::vector<Vec3> scale_vertices(std::span<const Vec3> vertices, double scale, const Vec3& center) {
  std::vector<Vec3> out(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) out[i] = center + scale * (vertices[i] - center);
  return out;
}

double mask_iou(const Image& a, const Image& b) {
  require(a.same_shape(b) && a.channels() == 1, "IoU needs equal single-channel masks");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values()[i] >= 0.5, y = b.values()[i] >= 0.5;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double auto_scale(const TemplateMesh& mesh, const Observation& front, const FitConfig& config) {
  config.validate();
  const Image& target = front.silhouette;
  const bool any = std::any_of(target.values().begin(), target.values().end(), [](double v) { return v >= 0.5; });
  if (!any) fail(ErrorKind::BadInput, "target silhouette is empty");
  const Vec3 center = scale_center(mesh.vertices);
  const int count = static_cast<int>(std::floor((config.scale_max - config.scale_min) / config.scale_step + 1e-9)) + 1;
  double best_scale = config.scale_min, best_iou = -1.0;
  for (int i = 0; i < count; ++i) {
    const double s = config.scale_min + i * config.scale_step;
    const auto verts = scale_vertices(mesh.vertices, s, center);
    const double iou = mask_iou(hard_silhouette(verts, mesh.faces, front.camera), target);
    if (iou > best_iou) {
      best_iou = iou;
      best_scale = s;
    }
  }
  return best_scale;
}

std::map<std::string, Vec2> project_landmarks(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                                              const Camera& camera, const std::vector<std::string>& names) {
  std::map<std::string, Vec2> out;
  for (const std::string& name : names) {
    const auto it = mesh.landmarks.find(name);
    if (it == mesh.landmarks.end()) fail(ErrorKind::InvalidArgument, fmt::format("unknown landmark '{}'", name));
    out[name] = camera.project(vertices[it->second]);
  }
  return out;
}

namespace {

void check_finite(double value, int stage, int step, const std::vector<TraceRow>& trace) {
  if (!std::isfinite(value)) {
    throw DivergenceError(fmt::format("energy diverged at stage {} step {}", stage, step), trace);
  }
}

}  // namespace

ShapeFit fit_shape(const TemplateMesh& mesh, std::span<const Vec3> rest, const DeformationGraph& graph,
                   std::span<const Observation> views, const FitConfig& config) {
  config.validate();
  require(!views.empty(), "fit_shape needs at least one view");
  require(static_cast<int>(rest.size()) == mesh.vertex_count(), "rest vertices do not match the mesh");
  for (const Observation& o : views) o.validate(mesh);

  struct LandmarkSet {
    std::vector<int> vertex;
    std::vector<Vec2> target;
  };
  std::vector<LandmarkSet> lmk(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    for (const auto& [name, p] : views[v].landmarks) {
      lmk[v].vertex.push_back(mesh.landmarks.at(name));
      lmk[v].target.push_back(p);
    }
  }
  const auto pairs = adjacent_face_pairs(mesh);

  ShapeFit out;
  out.params = GraphParams::identity(graph.node_count());
  std::vector<double> flat = out.params.flatten();
  Adam adam(flat.size(), config.lr_shape, config.adam_beta1, config.adam_beta2, config.adam_eps);
  const int steps = config.steps_stage1;

  for (int step = 0; step < steps; ++step) {
    const GraphParams params = GraphParams::unflatten(flat);
    const std::vector<Vec3> verts = deform(rest, graph, params);
    std::vector<Vec3> vgrad(verts.size(), Vec3::Zero());
    TraceRow row;
    row.stage = 1;
    row.step = step;
    const double w_arap = cosine_decay(config.w_arap, config.w_arap_end, step, steps);
    const double w_norm = cosine_decay(config.w_norm, config.w_norm_end, step, steps);

    for (std::size_t v = 0; v < views.size(); ++v) {
      const Camera& cam = views[v].camera;
      if (config.w_sil > 0.0) {
        const SoftSilhouette sil = render_silhouette(verts, mesh.faces, cam, config.sigma);
        ImageEnergy e = e_sil(sil.image, views[v].silhouette);
        row.sil += e.value;
        for (double& g : e.grad.values()) g *= config.w_sil;
        const auto g3 = render_silhouette_backward(verts, mesh.faces, cam, config.sigma, sil, e.grad);
        for (std::size_t i = 0; i < g3.size(); ++i) vgrad[i] += g3[i];
      }
      if (!lmk[v].vertex.empty()) {
        std::vector<Vec2> proj(lmk[v].vertex.size());
        for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = cam.project(verts[lmk[v].vertex[i]]);
        const PointEnergy e = e_lmk(proj, lmk[v].target, cam.image_size);
        row.lmk += e.value;
        if (config.w_lmk > 0.0) {
          for (std::size_t i = 0; i < proj.size(); ++i) {
            vgrad[lmk[v].vertex[i]] +=
                config.w_lmk * Vec3(e.grad[i].x() * cam.scale_x(), e.grad[i].y() * cam.scale_y(), 0.0);
          }
        }
      }
    }
    if (w_norm > 0.0) {
      const VertexEnergy e = e_norm(mesh, verts, pairs);
      row.norm = e.value;
      for (std::size_t i = 0; i < verts.size(); ++i) vgrad[i] += w_norm * e.grad[i];
    }
    GraphParams grad = deform_backward(rest, graph, params, vgrad);
    if (w_arap > 0.0) {
      ArapResult a = e_arap(graph, params);
      row.arap = a.energy;
      for (int i = 0; i < graph.node_count(); ++i) {
        grad.axis_angles[i] += w_arap * a.gradient.axis_angles[i];
        grad.translations[i] += w_arap * a.gradient.translations[i];
      }
    }
    row.total = config.w_sil * row.sil + config.w_lmk * row.lmk + w_arap * row.arap + w_norm * row.norm;
    out.trace.push_back(row);
    check_finite(row.total, 1, step, out.trace);
    const std::vector<double> g = grad.flatten();
    adam.step(flat, g);
  }
  out.params = GraphParams::unflatten(flat);
  out.vertices = deform(rest, graph, out.params);
  return out;
}

TextureFit recover_texture(const TemplateMesh& mesh, std::span<const Vec3> vertices,
                           std::span<const Observation> views, const FitConfig& config) {
  config.validate();
  require(!views.empty(), "recover_texture needs at least one view");
  require(static_cast<int>(vertices.size()) == mesh.vertex_count(), "vertices do not match the mesh");
  for (const Observation& o : views) o.validate(mesh);
  const int res = config.texture_resolution;

  struct ViewData {
    SamplingOperator op;
    Mask loss_mask;  // target silhouette
    Mask tv_mask;    // target silhouette and covered by the fitted mesh
  };
  std::vector<ViewData> data;
  std::vector<Camera> cameras;
  std::size_t masked = 0;
  for (const Observation& o : views) {
    const int n = o.camera.image_size;
    ViewData d{SamplingOperator(mesh, rasterize(vertices, mesh.faces, o.camera), res), Mask(n, n), Mask(n, n)};
    for (int p = 0; p < n * n; ++p) {
      const bool in = o.silhouette.values()[p] >= 0.5;
      d.loss_mask.bits[p] = in;
      d.tv_mask.bits[p] = in && d.op.covered(p);
      masked += in;
    }
    data.push_back(std::move(d));
    cameras.push_back(o.camera);
  }
  const double inv_n = masked > 0 ? 1.0 / (3.0 * static_cast<double>(masked)) : 0.0;

  TextureFit out;
  out.texture = TextureMap(res, res, 3, 0.5);
  auto tex = out.texture.values();
  Adam adam(tex.size(), config.lr_texture, config.adam_beta1, config.adam_beta2, config.adam_eps);
  std::vector<double> grad(tex.size());

  for (int step = 0; step < config.steps_stage2; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    TraceRow row;
    row.stage = 2;
    row.step = step;
    for (std::size_t v = 0; v < views.size(); ++v) {
      const ViewData& d = data[v];
      const Image rendered = d.op.apply(out.texture);
      Image dimg(rendered.width(), rendered.height(), 3);
      const auto r = rendered.values();
      const auto target = views[v].image.values();
      auto gi = dimg.values();
      for (std::size_t p = 0; p < d.loss_mask.bits.size(); ++p) {
        if (!d.loss_mask.bits[p]) continue;
        for (int c = 0; c < 3; ++c) {
          const double diff = r[3 * p + c] - target[3 * p + c];
          row.img += diff * diff * inv_n;
          gi[3 * p + c] += config.w_img * 2.0 * diff * inv_n;
        }
      }
      if (config.w_tv > 0.0) {
        const ImageEnergy tv = e_tv(rendered, &d.tv_mask);
        row.tv += tv.value;
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += config.w_tv * tv.grad.values()[i];
      }
      const TextureMap back = d.op.adjoint(dimg);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += back.values()[i];
    }
    double uv_tv = 0.0;
    if (config.w_tv_uv > 0.0) {
      const ImageEnergy tv = e_tv(out.texture);
      uv_tv = tv.value;
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += config.w_tv_uv * tv.grad.values()[i];
    }
    row.total = config.w_img * row.img + config.w_tv * row.tv + config.w_tv_uv * uv_tv;
    out.trace.push_back(row);
    check_finite(row.total, 2, step, out.trace);
    adam.step(tex, grad);
    for (double& t : tex) t = std::clamp(t, 0.0, 1.0);
  }

  const DomainMask domain = rasterize_uv_domain(mesh, res);
  for (int i = 0; i < res * res; ++i) {
    if (!domain.inside.bits[i]) {
      for (int c = 0; c < 3; ++c) tex[3 * i + c] = 0.0;
    }
  }
  out.coverage = texel_coverage(mesh, vertices, cameras, res);
  return out;
}

FitResult phase1(const TemplateMesh& mesh, std::span<const Observation> views, const FitConfig& config) {
  config.validate();
  const Observation* front = nullptr;
  const Observation* back = nullptr;
  for (const Observation& o : views) (o.camera.view == View::Front ? front : back) = &o;
  if (views.size() != 2 || !front || !back) fail(ErrorKind::InvalidArgument, "both views required");
  front->validate(mesh);
  back->validate(mesh);

  FitResult out;
  out.scale = auto_scale(mesh, *front, config);
  const auto rest = scale_vertices(mesh.vertices, out.scale, scale_center(mesh.vertices));
  const DeformationGraph graph =
      build_graph(rest, {config.downsample_factor, config.node_neighbors, config.skin_nodes});
  const std::vector<Observation> ordered{*front, *back};
  ShapeFit shape = fit_shape(mesh, rest, graph, ordered, config);
  TextureFit tex;
  try {
    tex = recover_texture(mesh, shape.vertices, ordered, config);
  } catch (const DivergenceError& e) {
    std::vector<TraceRow> trace = shape.trace;
    trace.insert(trace.end(), e.trace().begin(), e.trace().end());
    throw DivergenceError(e.what(), std::move(trace));
  }
  out.vertices = std::move(shape.vertices);
  out.params = std::move(shape.params);
  out.coarse = std::move(tex.texture);
  out.coverage = std::move(tex.coverage);
  out.trace = std::move(shape.trace);
  out.trace.insert(out.trace.end(), tex.trace.begin(), tex.trace.end());
  return out;
}

}  // namespace gtex
