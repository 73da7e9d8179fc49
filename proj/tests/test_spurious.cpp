#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "ica_lab/classify.hpp"
#include "ica_lab/density.hpp"
#include "ica_lab/numerics.hpp"
#include "ica_lab/rng.hpp"
#include "ica_lab/spurious.hpp"

using namespace ica_lab;

namespace {

Eigen::VectorXd vecd(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Eigen::MatrixXd random_points(int d, int n, double lo, double hi, uint64_t seed) {
  RngStream rng(seed);
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) pts(i, j) = rng.uniform(lo, hi);
  return pts;
}

std::shared_ptr<GaussianMixtureDensity> three_blob_mixture() {
  auto g1 = std::make_shared<GaussianDensity>(
      vecd({-1.0, 0.0}), Eigen::MatrixXd(0.3 * Eigen::MatrixXd::Identity(2, 2)));
  auto g2 = std::make_shared<GaussianDensity>(
      vecd({1.0, 0.5}), Eigen::MatrixXd(0.4 * Eigen::MatrixXd::Identity(2, 2)));
  Eigen::MatrixXd c3(2, 2);
  c3 << 0.5, 0.1, 0.1, 0.3;
  auto g3 = std::make_shared<GaussianDensity>(vecd({0.0, -1.0}), c3);
  return std::make_shared<GaussianMixtureDensity>(
      std::vector<double>{0.3, 0.4, 0.3},
      std::vector<std::shared_ptr<GaussianDensity>>{g1, g2, g3});
}

}  // namespace

TEST_CASE("bump is 1 at the center, 0 beyond the support, smooth between") {
  CHECK(bump(0.0) == 1.0);
  CHECK(bump(1.0) == 0.0);
  CHECK(bump(1.5) == 0.0);
  CHECK(bump(0.5) > 0.0);
  CHECK(bump(0.5) < 1.0);
  CHECK(bump_derivative(0.0) == 0.0);
  CHECK(bump_derivative(1.2) == 0.0);
  for (double s : {0.2, 0.5, 0.8, 0.95}) {
    double fd = (bump(s + 1e-6) - bump(s - 1e-6)) / 2e-6;
    CHECK(bump_derivative(s) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("RadiusRotationProfile validates and fills its cutoff") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5, 0.5}), 0, 1, 1.2);
  CHECK(prof.cutoff == doctest::Approx(0.5));
  CHECK(prof.angle(1.0, 0.0) == doctest::Approx(1.2));
  CHECK(prof.angle(0.5, 0.0) == doctest::Approx(0.6));
  CHECK(prof.angle(1.0, 0.5) == 0.0);
  CHECK(prof.angle(1.0, 0.7) == 0.0);

  CHECK_THROWS_AS(RadiusRotationProfile::make(vecd({0.5}), 0, 1), argument_error);
  CHECK_THROWS_AS(RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 0),
                  argument_error);
  CHECK_THROWS_AS(RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.0, 2.0),
                  argument_error);
}

TEST_CASE("radius-rotation slices preserve volume exactly and fix the far zone") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.3, 0.35);
  MapPtr map = prof.map_at(0.8);

  Eigen::MatrixXd pts = random_points(2, 80, 0.05, 0.95, 41);
  ClassReport vol = classify_volume_preserving(*map, pts, 1e-10);
  CHECK(vol.pass);

  // Outside the cutoff radius the map returns its input bit for bit.
  Eigen::VectorXd far = vecd({0.95, 0.82});
  Eigen::VectorXd image = map->evaluate(far);
  CHECK(image(0) == far(0));
  CHECK(image(1) == far(1));

  // Inside, it genuinely moves points yet stays invertible.
  Eigen::VectorXd near = vecd({0.55, 0.45});
  CHECK((map->evaluate(near) - near).norm() > 1e-3);
  CHECK((map->inverse(map->evaluate(near)) - near).norm() < 1e-12);
}

TEST_CASE("radius-rotation slices compose additively in time") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 0.9, 0.4);
  MapPtr m1 = prof.map_at(0.3);
  MapPtr m2 = prof.map_at(0.45);
  MapPtr m3 = prof.map_at(0.75);
  Eigen::MatrixXd pts = random_points(2, 25, 0.2, 0.8, 17);
  for (int i = 0; i < pts.rows(); ++i) {
    Eigen::VectorXd x = pts.row(i).transpose();
    CHECK((m2->evaluate(m1->evaluate(x)) - m3->evaluate(x)).norm() < 1e-12);
  }
}

TEST_CASE("the radius-rotation generator integrates back to the map family") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.1, 0.4);
  FieldPtr gen = prof.generator();
  MapPtr direct = prof.map_at(0.6);
  MapPtr flowed = flow_map(gen, 0.6, 600);
  Eigen::MatrixXd pts = random_points(2, 20, 0.15, 0.85, 29);
  for (int i = 0; i < pts.rows(); ++i) {
    Eigen::VectorXd x = pts.row(i).transpose();
    CHECK((direct->evaluate(x) - flowed->evaluate(x)).norm() < 1e-8);
  }
}

TEST_CASE("radius rotation is measure preserving for the matched Gaussian") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.0, 0.4);
  MapPtr map = prof.map_at(0.7);
  GaussianDensity iso(vecd({0.5, 0.5}),
                      Eigen::MatrixXd(0.04 * Eigen::MatrixXd::Identity(2, 2)));
  Eigen::MatrixXd pts = random_points(2, 60, 0.2, 0.8, 61);
  MptReport rep = verify_mpt(*map, iso, pts, 1e-7);
  CHECK(rep.pass);
  CHECK(rep.n_points == 60);

  // An off-center Gaussian is not invariant under the same rotation.
  GaussianDensity off(vecd({0.62, 0.5}),
                      Eigen::MatrixXd(0.04 * Eigen::MatrixXd::Identity(2, 2)));
  MptReport bad = verify_mpt(*map, off, pts, 1e-3);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_relative_residual > 1e-2);
  CHECK(bad.worst_point.size() == 2);
}

TEST_CASE("build_xij implements the rotated density gradient") {
  auto normal = GaussianDensity::standard(2);
  FieldPtr field = build_xij(normal, 0, 1);
  Eigen::VectorXd x = vecd({1.0, 0.0});
  Eigen::VectorXd v = field->evaluate(0.0, x);
  // Component 0 carries d_1 p (zero here); component 1 carries -d_0 p = x_0 p.
  CHECK(v(0) == doctest::Approx(0.0));
  CHECK(v(1) == doctest::Approx(std::exp(-0.5) / (2.0 * M_PI)).epsilon(1e-12));

  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd p = random_points(2, 1, -1.5, 1.5, 100 + i).row(0).transpose();
    CHECK(std::abs(fd_divergence(*field, 0.0, p)) < 1e-8);
  }
  CHECK_THROWS_AS(build_xij(normal, 1, 1), argument_error);
  CHECK_THROWS_AS(build_xij(normal, -1, 1), argument_error);
}

TEST_CASE("flows of the mixture eddy field preserve volume and the mixture") {
  auto mix = three_blob_mixture();
  FieldPtr field = build_xij(mix, 0, 1);
  Eigen::MatrixXd pts = random_points(2, 40, -1.8, 1.8, 71);
  MapPtr flow = flow_map(field, 0.5, 300);
  CHECK(classify_volume_preserving(*flow, pts, 1e-4).pass);
  MptReport rep = verify_mpt(*flow, *mix, pts, 1e-3);
  CHECK(rep.pass);
}

TEST_CASE("RadialBump evaluates, differentiates and confines its support") {
  RadialBump phi(vecd({0.5, 0.5, 0.5}), 0.4, 0.7);
  CHECK(phi.value(vecd({0.5, 0.5, 0.5})) == doctest::Approx(0.7));
  CHECK(phi.value(vecd({0.95, 0.5, 0.5})) == 0.0);
  Eigen::VectorXd x = vecd({0.6, 0.45, 0.55});
  Eigen::VectorXd g = phi.gradient(x);
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += 1e-6;
    xm(j) -= 1e-6;
    CHECK(g(j) == doctest::Approx((phi.value(xp) - phi.value(xm)) / 2e-6)
                      .epsilon(1e-4));
  }
  CHECK(phi.gradient(vecd({1.2, 0.5, 0.5})).norm() == 0.0);
  CHECK(phi.support().kind == Domain::Kind::Ball);
}

TEST_CASE("compact divergence-free eddies vanish outside and keep volume") {
  RadialBump phi(vecd({0.0, 0.0}), 0.8, 1.0);
  FieldPtr field = build_compact_divfree(phi, 0, 1);
  CHECK(field->evaluate(0.0, vecd({0.9, 0.0})).norm() == 0.0);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd p = random_points(2, 1, -0.7, 0.7, 300 + i).row(0).transpose();
    CHECK(std::abs(fd_divergence(*field, 0.0, p)) < 1e-6);
  }
  MapPtr flow = flow_map(field, 1.0, 500);
  Eigen::MatrixXd pts = random_points(2, 30, -0.9, 0.9, 83);
  CHECK(classify_volume_preserving(*flow, pts, 1e-6).pass);
  // Flow leaves the exterior untouched (field support is the closed ball).
  Eigen::VectorXd far = vecd({1.3, -1.1});
  CHECK((flow->evaluate(far) - far).norm() < 1e-12);
}

TEST_CASE("flow_map round-trips and exposes an accurate Jacobian") {
  auto mix = three_blob_mixture();
  FieldPtr field = build_xij(mix, 0, 1);
  MapPtr flow = flow_map(field, 0.4, 200);
  Eigen::VectorXd x = vecd({0.4, -0.3});
  CHECK((flow->inverse(flow->evaluate(x)) - x).norm() < 1e-9);

  Eigen::MatrixXd jac = flow->jacobian(x);
  Eigen::MatrixXd fd = fd_jacobian(*flow, x, 1e-4);
  CHECK((jac - fd).cwiseAbs().maxCoeff() < 1e-5);
  // Divergence-free flow: unit determinant to solver precision.
  CHECK(det_small(jac) == doctest::Approx(1.0).epsilon(1e-9));

  MapPtr still = flow_map(field, 0.0, 10);
  CHECK((still->evaluate(x) - x).norm() == 0.0);
}

TEST_CASE("angular transforms reproduce the sine-power integrals") {
  for (bool tabulated : {true, false}) {
    AngularTransform t1 = make_angular_transform(1, tabulated);
    CHECK(t1.g_total == doctest::Approx(2.0).epsilon(1e-9));
    // g_1(pi/2) = 1 = half the total, so u = 1/2 maps to pi/2.
    CHECK(t1.forward(0.5) == doctest::Approx(M_PI / 2.0).epsilon(1e-8));
    AngularTransform t2 = make_angular_transform(2, tabulated);
    CHECK(t2.g_total == doctest::Approx(M_PI / 2.0).epsilon(1e-9));
    CHECK(t2.forward(0.5) == doctest::Approx(M_PI / 2.0).epsilon(1e-8));
    for (double u : {0.12, 0.37, 0.51, 0.83}) {
      double theta = t1.forward(u);
      CHECK(t1.inverse(theta) == doctest::Approx(u).epsilon(1e-8));
      double fd = (t1.forward(u + 1e-6) - t1.forward(u - 1e-6)) / 2e-6;
      CHECK(t1.derivative(u) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("RadialDensity gaussian quantiles match the Rayleigh closed form") {
  RadialDensity radial = RadialDensity::gaussian(2);
  // Planar radius of a standard normal: CDF 1 - exp(-r^2/2).
  CHECK(radial.radial_quantile(0.5) ==
        doctest::Approx(std::sqrt(2.0 * std::log(2.0))).epsilon(1e-6));
  for (double u : {0.1, 0.35, 0.65, 0.9}) {
    double exact = std::sqrt(-2.0 * std::log(1.0 - u));
    CHECK(radial.radial_quantile(u) == doctest::Approx(exact).epsilon(1e-6));
    CHECK(radial.radial_cdf(radial.radial_quantile(u)) ==
          doctest::Approx(u).epsilon(1e-8));
  }
  // Spatial density at radius r is the standard normal value.
  double r = 1.3;
  CHECK(radial.density_value(r) ==
        doctest::Approx(std::exp(-r * r / 2.0) / (2.0 * M_PI)).epsilon(1e-8));
}

TEST_CASE("RadialDensity annulus has the polynomial radial law") {
  RadialDensity ann = RadialDensity::annulus(2, 1.0, 2.0);
  CHECK(ann.lo() == 1.0);
  CHECK(ann.hi() == 2.0);
  // q(r) = 2 r / (hi^2 - lo^2) on the shell.
  CHECK(ann.radial_value(1.5) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ann.radial_quantile(0.5) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-8));
  // Flat spatial density 1 / (pi (hi^2 - lo^2)) on the shell.
  CHECK(ann.density_value(1.7) == doctest::Approx(1.0 / (3.0 * M_PI)).epsilon(1e-9));
  auto spatial = ann.spatial_density();
  CHECK(spatial->value(vecd({1.7, 0.0})) ==
        doctest::Approx(1.0 / (3.0 * M_PI)).epsilon(1e-9));
}

TEST_CASE("the cube-to-law transport has orthogonal columns and moves mass right") {
  for (int d : {2, 3}) {
    RadialDensity radial = RadialDensity::gaussian(d);
    MapPtr f = build_polar_reparam(radial);
    DensityPtr target = radial.spatial_density();
    Eigen::MatrixXd cube =
        halton_points(Eigen::VectorXd::Constant(d, 0.05),
                      Eigen::VectorXd::Constant(d, 0.95), 60);
    CHECK(classify_oct(*f, cube, 1e-5).pass);
    for (int i = 0; i < cube.rows(); ++i) {
      Eigen::VectorXd u = cube.row(i).transpose();
      // Uniform cube law: target(f(u)) * |det Df(u)| must equal 1.
      double transported =
          target->value(f->evaluate(u)) * std::exp(f->log_abs_det_jacobian(u));
      CHECK(transported == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("annulus transport also passes the change-of-variables identity") {
  RadialDensity ann = RadialDensity::annulus(3, 0.8, 1.9);
  MapPtr f = build_polar_reparam(ann);
  DensityPtr target = ann.spatial_density();
  Eigen::MatrixXd cube = halton_points(Eigen::VectorXd::Constant(3, 0.08),
                                       Eigen::VectorXd::Constant(3, 0.92), 40);
  CHECK(classify_oct(*f, cube, 1e-5).pass);
  for (int i = 0; i < cube.rows(); ++i) {
    Eigen::VectorXd u = cube.row(i).transpose();
    double transported =
        target->value(f->evaluate(u)) * std::exp(f->log_abs_det_jacobian(u));
    CHECK(transported == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("rotated transports agree in law but differ as maps") {
  RadialDensity radial = RadialDensity::gaussian(2);
  MapPtr f = build_polar_reparam(radial);
  DensityPtr target = radial.spatial_density();
  Eigen::MatrixXd rot = LinearMap::random_orthogonal(2, 99);
  MapPtr g = rotate_member(f, rot);

  Eigen::MatrixXd cube = halton_points(vecd({0.1, 0.1}), vecd({0.9, 0.9}), 40);
  double sup_gap = 0.0;
  for (int i = 0; i < cube.rows(); ++i) {
    Eigen::VectorXd u = cube.row(i).transpose();
    CHECK((g->evaluate(u) - rot * f->evaluate(u)).norm() < 1e-12);
    double transported =
        target->value(g->evaluate(u)) * std::exp(g->log_abs_det_jacobian(u));
    CHECK(transported == doctest::Approx(1.0).epsilon(1e-3));
    sup_gap = std::max(sup_gap, (g->evaluate(u) - f->evaluate(u)).norm());
  }
  CHECK(sup_gap > 0.1);
}

TEST_CASE("verify_mpt flags a map that genuinely shifts the law") {
  auto normal = GaussianDensity::standard(2);
  Eigen::MatrixXd stretch(2, 2);
  stretch << 1.1, 0.0, 0.0, 1.0;
  LinearMap map{stretch};
  Eigen::MatrixXd pts = random_points(2, 40, -1.5, 1.5, 7);
  MptReport rep = verify_mpt(map, *normal, pts, 1e-3);
  CHECK_FALSE(rep.pass);
  MptReport ok = verify_mpt(LinearMap{Eigen::MatrixXd::Identity(2, 2)}, *normal,
                            pts, 1e-12);
  CHECK(ok.pass);
}
