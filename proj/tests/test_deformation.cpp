#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "ica_lab/deformation.hpp"
#include "ica_lab/maps.hpp"
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

MapPtr identity_map(int d) {
  return std::make_shared<LinearMap>(Eigen::MatrixXd::Identity(d, d));
}

MapPtr diag_map(double a, double b) {
  Eigen::MatrixXd m(2, 2);
  m << a, 0.0, 0.0, b;
  return std::make_shared<LinearMap>(m);
}

}  // namespace

TEST_CASE("extract_generator recovers the generator of a rotation eddy family") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.0, 0.4);
  Deformation def;
  def.f0 = identity_map(2);
  def.deformed = [&](double t) { return prof.map_at(t); };

  FieldPtr extracted = extract_generator(def, 0.0);
  FieldPtr exact = prof.generator();
  Eigen::MatrixXd pts = random_points(2, 20, 0.2, 0.8, 5);
  for (int i = 0; i < pts.rows(); ++i) {
    Eigen::VectorXd x = pts.row(i).transpose();
    CHECK((extracted->evaluate(0.0, x) - exact->evaluate(0.0, x)).norm() < 1e-6);
  }
}

TEST_CASE("extract_generator sees the family relative to the base map") {
  // Phi_t = f0 ∘ R_t with f0 = diag(2,1): the latent generator is still the
  // eddy generator because f0 cancels inside Psi_t = f0^{-1} ∘ Phi_t.
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 0.8, 0.35);
  MapPtr f0 = diag_map(2.0, 1.0);
  Deformation def;
  def.f0 = f0;
  def.deformed = [&](double t) { return compose(f0, prof.map_at(t)); };

  FieldPtr extracted = extract_generator(def, 0.0);
  FieldPtr exact = prof.generator();
  Eigen::MatrixXd pts = random_points(2, 15, 0.25, 0.75, 8);
  for (int i = 0; i < pts.rows(); ++i) {
    Eigen::VectorXd x = pts.row(i).transpose();
    CHECK((extracted->evaluate(0.0, x) - exact->evaluate(0.0, x)).norm() < 1e-6);
  }
}

TEST_CASE("a family matching its reference extracts the zero generator") {
  RadiusRotationProfile prof =
      RadiusRotationProfile::make(vecd({0.5, 0.5}), 0, 1, 1.0, 0.4);
  Deformation def;
  def.f0 = identity_map(2);
  def.deformed = [&](double t) { return prof.map_at(t); };
  def.reference = [&](double t) { return prof.map_at(t); };

  FieldPtr extracted = extract_generator(def, 0.3);
  Eigen::MatrixXd pts = random_points(2, 15, 0.2, 0.8, 12);
  for (int i = 0; i < pts.rows(); ++i)
    CHECK(extracted->evaluate(0.0, pts.row(i).transpose()).norm() < 1e-7);
}

TEST_CASE("extract_generator validates its inputs") {
  Deformation empty;
  CHECK_THROWS_AS(extract_generator(empty, 0.0), argument_error);
  Deformation def;
  def.f0 = identity_map(2);
  def.deformed = [&](double) { return identity_map(2); };
  CHECK_THROWS_AS(extract_generator(def, 0.0, 0.0), argument_error);
  CHECK_THROWS_AS(extract_generator(def, 0.0, -1e-4), argument_error);
}

TEST_CASE("the zero field has identically zero constraint residuals") {
  FunctionalField zero(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
  });
  Eigen::MatrixXd pts = random_points(2, 25, 0.1, 0.9, 3);
  ConstraintReport rep = oct_constraint_residual(*identity_map(2), zero, pts);
  CHECK(rep.first_order_pass);
  CHECK(rep.divergence_pass);
  CHECK(rep.first_order_max == 0.0);
  CHECK(rep.divergence_max == 0.0);
  CHECK(rep.field_sup_norm == 0.0);
}

TEST_CASE("a rigid rotation satisfies the constraints against the identity") {
  FunctionalField rot(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vecd({-(x(1) - 0.5), x(0) - 0.5}));
  });
  Eigen::MatrixXd pts = random_points(2, 30, 0.1, 0.9, 9);
  ConstraintReport rep = oct_constraint_residual(*identity_map(2), rot, pts);
  CHECK(rep.first_order_pass);
  CHECK(rep.divergence_pass);
  CHECK(rep.first_order_max < 1e-6);
  CHECK(rep.divergence_max < 1e-7);
  CHECK(rep.d == 2);
  CHECK(rep.pair_residual(0, 0) == 0.0);
  CHECK(rep.pair_residual(0, 1) == doctest::Approx(rep.pair_residual(1, 0)));
}

TEST_CASE("column-norm weighting picks out the correctly skewed field") {
  // f0 = diag(2,1) has squared column norms (4, 1).  The compatibility
  // equation 4 d_2 X_1 + d_1 X_2 = 0 holds for X = (x_2, -4 x_1) but fails
  // for the unweighted rotation (x_2, -x_1).
  MapPtr f0 = diag_map(2.0, 1.0);
  FunctionalField good(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vecd({x(1), -4.0 * x(0)}));
  });
  FunctionalField bad(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vecd({x(1), -x(0)}));
  });
  Eigen::MatrixXd pts = random_points(2, 30, -1.0, 1.0, 31);
  ConstraintReport ok = oct_constraint_residual(*f0, good, pts);
  CHECK(ok.first_order_pass);
  CHECK(ok.divergence_pass);
  ConstraintReport nope = oct_constraint_residual(*f0, bad, pts);
  CHECK_FALSE(nope.first_order_pass);
  CHECK(nope.first_order_max > 1e-2);
  CHECK(nope.divergence_pass);  // still solenoidal
}

TEST_CASE("a compact eddy cannot deform a linear OCT map to first order") {
  MapPtr f0 = diag_map(2.0, 1.0);
  RadialBump phi(vecd({0.5, 0.5}), 0.4, 1.0);
  FieldPtr eddy = build_compact_divfree(phi, 0, 1);
  Eigen::MatrixXd pts = random_points(2, 60, 0.15, 0.85, 44);
  OctConstraintOptions opts;
  // The bump's third derivatives put the finite-difference noise floor for
  // the (analytically zero) divergence near 5e-7; 1e-5 still cleanly
  // separates it from genuinely non-solenoidal fields.
  opts.divergence_tol = 1e-5;
  ConstraintReport rep = oct_constraint_residual(*f0, *eddy, pts, opts);
  CHECK_FALSE(rep.first_order_pass);
  CHECK(rep.first_order_max > 1e-2);
  CHECK(rep.divergence_pass);
}

TEST_CASE("a source field fails the divergence constraint") {
  FunctionalField source(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x);
  });
  Eigen::MatrixXd pts = random_points(2, 20, 0.3, 0.9, 50);
  ConstraintReport rep = oct_constraint_residual(*identity_map(2), source, pts);
  CHECK_FALSE(rep.divergence_pass);
  CHECK(rep.divergence_max > 1e-1);
}

TEST_CASE("constraint residuals demand an orthogonal-column base map") {
  Eigen::MatrixXd sh(2, 2);
  sh << 1.0, 1.0, 0.0, 1.0;
  auto shear = std::make_shared<LinearMap>(sh);
  FunctionalField zero(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
  });
  Eigen::MatrixXd pts = random_points(2, 10, 0.2, 0.8, 2);
  CHECK_THROWS_AS(oct_constraint_residual(*shear, zero, pts), precondition_error);
  CHECK_THROWS_AS(oct_constraint_residual(*identity_map(2), zero,
                                          Eigen::MatrixXd(0, 2)),
                  argument_error);
}

TEST_CASE("separable modes solve the second-order system in the plane") {
  // X_0 = sin(pi x_0) cos(pi x_1) satisfies d_0^2 X_0 = d_1^2 X_0, which is
  // the d = 2 equation with unit column norms.
  FunctionalField mode(2, [](double, const Eigen::VectorXd& x) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    v(0) = std::sin(M_PI * x(0)) * std::cos(M_PI * x(1));
    return v;
  });
  Eigen::MatrixXd pts = random_points(2, 15, 0.2, 0.8, 66);
  CHECK(wave_residual(*identity_map(2), mode, 0, pts) < 1e-3);
}

TEST_CASE("the same mode misses the three-dimensional system by pi^2 X") {
  FunctionalField mode(3, [](double, const Eigen::VectorXd& x) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
    v(0) = std::sin(M_PI * x(0)) * std::cos(M_PI * x(1)) * std::cos(M_PI * x(2));
    return v;
  });
  Eigen::MatrixXd one_point(1, 3);
  one_point << 0.25, 0.25, 0.25;
  double x0 = std::sin(M_PI / 4.0) * std::cos(M_PI / 4.0) * std::cos(M_PI / 4.0);
  double expected = M_PI * M_PI * x0;
  CHECK(wave_residual(*identity_map(3), mode, 0, one_point) ==
        doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("boundary_vanishing separates compact eddies from global fields") {
  RadialBump phi(vecd({0.5, 0.5}), 0.3, 1.0);
  FieldPtr eddy = build_compact_divfree(phi, 0, 1);
  CHECK(boundary_vanishing(*eddy, 0.05) == 0.0);

  FunctionalField rot(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vecd({-(x(1) - 0.5), x(0) - 0.5}));
  });
  CHECK(boundary_vanishing(rot, 0.05) > 0.1);

  CHECK_THROWS_AS(boundary_vanishing(rot, 0.0), argument_error);
  CHECK_THROWS_AS(boundary_vanishing(rot, 0.6), argument_error);
  CHECK_THROWS_AS(boundary_vanishing(rot, 0.05, 0), argument_error);
}

TEST_CASE("boundary_vanishing is deterministic in its seed") {
  FunctionalField rot(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vecd({-(x(1) - 0.5), x(0) - 0.5}));
  });
  CHECK(boundary_vanishing(rot, 0.1, 256, 7) == boundary_vanishing(rot, 0.1, 256, 7));
}

TEST_CASE("resonance_alpha flags integer frequencies") {
  // mu = (2,1): a single transverse count m_1 = 1 forces alpha = 2.
  ResonanceResult r = resonance_alpha(vecd({2.0, 1.0}),
                                      Eigen::Vector2i(0, 1), 0);
  CHECK(r.alpha == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.resonant);

  // Swapping the roles gives alpha = 1/2: not an integer, no resonance.
  ResonanceResult half = resonance_alpha(vecd({2.0, 1.0}),
                                         Eigen::Vector2i(1, 0), 1);
  CHECK(half.alpha == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(half.resonant);

  // Irrational column-norm ratio: no mode count can close the system.
  ResonanceResult irr = resonance_alpha(vecd({std::sqrt(2.0), 1.0}),
                                        Eigen::Vector2i(0, 1), 0);
  CHECK(irr.alpha == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_FALSE(irr.resonant);

  // Three coordinates accumulate in quadrature.
  Eigen::VectorXd mu3 = vecd({1.0, 1.0, 1.0});
  Eigen::Vector3i m3(0, 3, 4);
  ResonanceResult quad = resonance_alpha(mu3, m3, 0);
  CHECK(quad.alpha == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(quad.resonant);
}

TEST_CASE("resonance_alpha validates shapes, signs and indices") {
  Eigen::VectorXd mu = vecd({2.0, 1.0});
  CHECK_THROWS_AS(resonance_alpha(mu, Eigen::Vector3i(0, 1, 0), 0), argument_error);
  CHECK_THROWS_AS(resonance_alpha(mu, Eigen::Vector2i(0, -1), 0), argument_error);
  CHECK_THROWS_AS(resonance_alpha(mu, Eigen::Vector2i(0, 1), 2), argument_error);
  CHECK_THROWS_AS(resonance_alpha(vecd({0.0, 1.0}), Eigen::Vector2i(0, 1), 0),
                  argument_error);
}
