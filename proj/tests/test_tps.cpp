#include <doctest.h>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "gtex/harness.hpp"
#include "gtex/metrics.hpp"
#include "gtex/tps.hpp"

using namespace gtex;

namespace {

std::vector<Vec2> random_points(int n, double lo, double hi) {
  std::vector<Vec2> p(n);
  for (Vec2& x : p) x = Vec2(fixture::uniform(lo, hi), fixture::uniform(lo, hi));
  return p;
}

// Dense interpolating spline written out from scratch, solved with a QR.
struct DenseTps {
  std::vector<Vec2> src;
  Eigen::MatrixXd coef;  // (n + 3) x 2

  DenseTps(const std::vector<Vec2>& s, const std::vector<Vec2>& d) : src(s) {
    const int n = static_cast<int>(s.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 3, n + 3);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = u((s[i] - s[j]).norm());
      a(i, n) = a(n, i) = 1.0;
      a(i, n + 1) = a(n + 1, i) = s[i].x();
      a(i, n + 2) = a(n + 2, i) = s[i].y();
      b.row(i) = d[i].transpose();
    }
    coef = a.colPivHouseholderQr().solve(b);
  }
  static double u(double r) { return r == 0.0 ? 0.0 : r * r * std::log(r); }
  Vec2 operator()(const Vec2& p) const {
    const int n = static_cast<int>(src.size());
    Vec2 out = coef.row(n).transpose() + p.x() * coef.row(n + 1).transpose() + p.y() * coef.row(n + 2).transpose();
    for (int i = 0; i < n; ++i) out += u((p - src[i]).norm()) * coef.row(i).transpose();
    return out;
  }
};

}  // namespace

TEST_CASE("tps kernel") {
  CHECK(tps_kernel(0.0) == 0.0);
  CHECK(tps_kernel(1.0) == 0.0);
  CHECK(tps_kernel(2.0) == doctest::Approx(4.0 * std::log(2.0)));
  CHECK(tps_kernel(0.5) < 0.0);
}

TEST_CASE("tps_solve") {
  const std::vector<Vec2> src = random_points(8, 0.0, 1.0);

  SUBCASE("identity") {
    const TpsWarp w = tps_solve(src, src, 0.0);
    CHECK((w.affine.leftCols<2>() - Eigen::Matrix2d::Identity()).norm() < 1e-9);
    CHECK(w.affine.col(2).norm() < 1e-9);
    for (const Vec2& k : w.kernel_weights) CHECK(k.norm() < 1e-9);
    const std::vector<Vec2> probe = random_points(10, -0.5, 1.5);
    const auto out = tps_apply(w, probe);
    for (std::size_t i = 0; i < probe.size(); ++i) CHECK((out[i] - probe[i]).norm() < 1e-9);
    CHECK(std::abs(w.bending_energy()) < 1e-12);
  }
  SUBCASE("affine targets are reproduced without bending") {
    Eigen::Matrix2d a;
    a << 1.3, -0.4, 0.2, 0.8;
    const Vec2 b(5.0, -2.0);
    std::vector<Vec2> dst;
    for (const Vec2& p : src) dst.push_back(a * p + b);
    const TpsWarp w = tps_solve(src, dst, 0.0);
    for (const Vec2& k : w.kernel_weights) CHECK(k.norm() < 1e-8);
    for (const Vec2& p : random_points(10, -1.0, 2.0)) CHECK((w.apply(p) - (a * p + b)).norm() < 1e-8);
    const Vec2 mid = 0.5 * (src[0] + src[1]);
    CHECK((w.apply(mid) - (a * mid + b)).norm() < 1e-9);
  }
  SUBCASE("random correspondence: interpolation and a dense reference solve") {
    const std::vector<Vec2> dst = random_points(8, 0.0, 100.0);
    const TpsWarp w = tps_solve(src, dst, 0.0);
    const auto hit = tps_apply(w, src);
    for (int i = 0; i < 8; ++i) CHECK((hit[i] - dst[i]).norm() < 1e-6);
    const DenseTps oracle(src, dst);
    for (const Vec2& p : random_points(20, -0.2, 1.2)) CHECK((w.apply(p) - oracle(p)).norm() < 1e-6);
    CHECK(w.bending_energy() > 0.0);
  }
  SUBCASE("regularization trades accuracy for smoothness") {
    const std::vector<Vec2> dst = random_points(8, 0.0, 1.0);
    const TpsWarp exact = tps_solve(src, dst, 0.0);
    const TpsWarp smooth = tps_solve(src, dst, 1.0);
    CHECK(smooth.bending_energy() < exact.bending_energy());
    double miss = 0.0;
    for (int i = 0; i < 8; ++i) miss += (smooth.apply(src[i]) - dst[i]).norm();
    CHECK(miss > 1e-6);
  }
  SUBCASE("degenerate controls") {
    const std::vector<Vec2> line{Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(3, 3)};
    CHECK_THROWS_AS(tps_solve(line, line, 0.0), Error);
    std::vector<Vec2> dup = src;
    dup[3] = dup[1];
    CHECK_THROWS_AS(tps_solve(dup, src, 0.0), Error);
    CHECK_THROWS_AS(tps_solve(std::vector<Vec2>(src.begin(), src.begin() + 2),
                              std::vector<Vec2>(src.begin(), src.begin() + 2), 0.0),
                    Error);
    CHECK_THROWS_AS(tps_solve(src, std::vector<Vec2>(src.begin(), src.begin() + 5), 0.0), Error);
  }
}

TEST_CASE("sample_bilinear") {
  Image img(2, 2, 1);
  img(1, 0) = 1.0;
  img(1, 1) = 1.0;
  CHECK(sample_bilinear(img, Vec2(0.5, 0.5), 0) == 0.0);
  CHECK(sample_bilinear(img, Vec2(1.0, 0.7), 0) == doctest::Approx(0.5));
  CHECK(sample_bilinear(img, Vec2(-3.0, 9.0), 0) == 0.0);
  CHECK(sample_bilinear(img, Vec2(9.0, -3.0), 0) == 1.0);
}

TEST_CASE("tps_bake_texture") {
  SUBCASE("flat front-facing grid with a layout matching the image") {
    TemplateMesh m = fixture::grid(9, 0.9);
    for (int j = 1; j < 9; j += 3)
      for (int i = 1; i < 9; i += 3) m.landmarks["p" + std::to_string(j * 9 + i)] = j * 9 + i;
    const int res = 128;
    const DomainMask d = rasterize_uv_domain(m, res);
    const TextureMap gt = gen_texture(parse_recipe("blobs"), res, 5, &d);
    auto views = render_observations(m, m.vertices, gt, 1.0, 128);
    views.resize(1);
    // Image v runs downward, UV v upward: the spline must absorb the flip.
    const TpsBake bake = tps_bake_texture(m, views, res, 0.0);
    CHECK(bake.landmark_count == 9);
    CHECK(ssim_masked(bake.texture, gt, d.inside) > 0.95);
    int missing = 0;
    for (bool b : bake.missing.bits) missing += b;
    CHECK(missing < res * res / 50);
  }
  SUBCASE("bent sleeves leave texels unseen") {
    const TemplateAsset a = load_template_asset(resolve_template("tshirt"));
    const std::vector<double> coeffs{0.0, 1.0, 1.0};
    const auto posed = apply_blendshapes(a.blendshapes, coeffs);
    const DomainMask d = rasterize_uv_domain(a.mesh, 128);
    const TextureMap gt = gen_texture(parse_recipe("stripes"), 128, 3, &d);
    const auto views = render_observations(a.mesh, posed, gt, 1.2, 128);
    const TpsBake bake = tps_bake_texture(a.mesh, views, 128);
    int missing = 0;
    for (int i = 0; i < 128 * 128; ++i) {
      if (bake.missing.bits[i]) {
        ++missing;
        CHECK(d.inside.bits[i]);
        CHECK(bake.texture.values()[3 * i] == 0.5);
      }
      if (!d.inside.bits[i]) CHECK(bake.texture.values()[3 * i + 1] == 0.0);
    }
    CHECK(missing > 0);
    CHECK(bake.landmark_count >= 8);
  }
  SUBCASE("too few landmarks") {
    TemplateMesh m = fixture::grid(5);
    m.landmarks["a"] = 0;
    m.landmarks["b"] = 4;
    const DomainMask d = rasterize_uv_domain(m, 32);
    const auto views = render_observations(m, m.vertices, gen_texture(parse_recipe("checker"), 32, 1, &d), 1.0, 32);
    CHECK_THROWS_AS(tps_bake_texture(m, std::span(views).first(1), 32), Error);
  }
}
