#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "ica_lab/errors.hpp"
#include "ica_lab/numerics.hpp"
#include "ica_lab/rng.hpp"
#include "ica_lab/smooth_map.hpp"
#include "ica_lab/vector_field.hpp"

using namespace ica_lab;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("fd_jacobian_of matches the analytic Jacobian of a polynomial map") {
  auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(2);
    y << x(0) * x(0) + 2.0 * x(1), std::sin(x(0)) * x(1);
    return y;
  };
  Eigen::VectorXd x = vec2(0.7, -1.3);
  Eigen::MatrixXd jac = fd_jacobian_of(f, x, 1e-5);
  Eigen::MatrixXd expect(2, 2);
  expect << 2.0 * x(0), 2.0, std::cos(x(0)) * x(1), std::sin(x(0));
  CHECK((jac - expect).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(fd_jacobian_of(f, x, 0.0), argument_error);
  CHECK_THROWS_AS(fd_jacobian_of(f, x, -1e-5), argument_error);
}

TEST_CASE("fd_jacobian refuses stencils that poke out of the map domain") {
  auto fn = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x * 2.0); };
  auto map = std::make_shared<FunctionalMap>(2, fn);
  map->set_domain_public(Domain::unit_cube(2));
  CHECK_NOTHROW(fd_jacobian(*map, vec2(0.5, 0.5), 1e-4));
  // Probe points at 1e-4 distance would cross x_0 = 0.
  CHECK_THROWS_AS(fd_jacobian(*map, vec2(5e-5, 0.5), 1e-4), domain_error);
  Eigen::VectorXd wrong_dim(3);
  wrong_dim << 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(fd_jacobian(*map, wrong_dim, 1e-4), argument_error);
}

TEST_CASE("fd_divergence recovers the divergence of a quadratic field") {
  // X(x, y) = (x^2 y, 3 y) has divergence 2 x y + 3.
  FunctionalField field(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vec2(x(0) * x(0) * x(1), 3.0 * x(1)));
  });
  Eigen::VectorXd x = vec2(1.2, -0.4);
  CHECK(fd_divergence(field, 0.0, x) ==
        doctest::Approx(2.0 * x(0) * x(1) + 3.0).epsilon(1e-8));
}

TEST_CASE("rk4_flow integrates a rotation field to machine-level accuracy") {
  // dx/dt = W x with W = [[0,-1],[1,0]] rotates by angle t.
  FunctionalField field(2, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(vec2(-x(1), x(0)));
  });
  Eigen::VectorXd x0 = vec2(1.0, 0.0);
  double t = 1.3;
  Eigen::VectorXd xt = rk4_flow(field, x0, 0.0, t, 1000);
  CHECK(xt(0) == doctest::Approx(std::cos(t)).epsilon(1e-10));
  CHECK(xt(1) == doctest::Approx(std::sin(t)).epsilon(1e-10));

  // Backwards integration returns to the start.
  Eigen::VectorXd back = rk4_flow(field, xt, t, 0.0, 1000);
  CHECK((back - x0).norm() < 1e-10);
}

TEST_CASE("rk4_flow integrates exponential decay and respects step counts") {
  FunctionalField field(1, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(-2.0 * x);
  });
  Eigen::VectorXd x0(1);
  x0 << 3.0;
  Eigen::VectorXd xt = rk4_flow(field, x0, 0.0, 1.0, 200);
  CHECK(xt(0) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-8));
}

TEST_CASE("rk4_flow reports the failure time when the state blows up") {
  // dx/dt = x^3 from x0 = 2 blows up at t = 1/(2 x0^2) = 0.125.
  FunctionalField field(1, [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.array().pow(3).matrix());
  });
  Eigen::VectorXd x0(1);
  x0 << 2.0;
  try {
    rk4_flow(field, x0, 0.0, 1.0, 64);
    FAIL("expected integration_error");
  } catch (const integration_error& e) {
    CHECK(e.t_fail() > 0.0);
    CHECK(e.t_fail() <= 1.0);
  }
}

TEST_CASE("rk4_default_steps scales with the span and has a floor") {
  CHECK(rk4_default_steps(0.0, 1.0) == 1000);
  CHECK(rk4_default_steps(0.0, 2.0) == 2000);
  CHECK(rk4_default_steps(1.0, 0.0) == 1000);
  CHECK(rk4_default_steps(0.0, 1e-3) == 16);
}

TEST_CASE("quad_adaptive integrates smooth and peaked functions") {
  double s = quad_adaptive([](double t) { return std::sin(t); }, 0.0, M_PI);
  CHECK(s == doctest::Approx(2.0).epsilon(1e-11));
  double p = quad_adaptive([](double t) { return t * t; }, 0.0, 1.0);
  CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-11));
  // Sharp Gaussian bump: integral over [-1, 1] of exp(-100 t^2) is
  // sqrt(pi)/10 * erf(10).
  double g =
      quad_adaptive([](double t) { return std::exp(-100.0 * t * t); }, -1.0, 1.0);
  CHECK(g == doctest::Approx(std::sqrt(M_PI) / 10.0 * std::erf(10.0)).epsilon(1e-9));
}

TEST_CASE("inverse_monotone solves f(x) = y with and without a derivative") {
  auto cube = [](double x) { return x * x * x; };
  CHECK(inverse_monotone(cube, 0.008, 0.0, 2.0) == doctest::Approx(0.2).epsilon(1e-10));
  auto dcube = [](double x) { return 3.0 * x * x; };
  CHECK(inverse_monotone(cube, 5.0, 0.0, 2.0, 1e-13, dcube) ==
        doctest::Approx(std::cbrt(5.0)).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_monotone(cube, 9.0, 0.0, 2.0), range_error);
  CHECK_THROWS_AS(inverse_monotone(cube, -0.5, 0.0, 2.0), range_error);
}

TEST_CASE("MonotoneTable interpolates, differentiates and inverts") {
  auto f = [](double x) { return x + 0.5 * std::sin(x); };
  MonotoneTable table(f, 0.0, 3.0, 2048);
  CHECK(table.lo() == 0.0);
  CHECK(table.hi() == 3.0);
  for (double x : {0.05, 0.7, 1.4142, 2.3, 2.95}) {
    CHECK(table.value(x) == doctest::Approx(f(x)).epsilon(1e-9));
    CHECK(table.derivative(x) ==
          doctest::Approx(1.0 + 0.5 * std::cos(x)).epsilon(1e-5));
    CHECK(table.inverse(f(x)) == doctest::Approx(x).epsilon(1e-8));
  }
}

TEST_CASE("MonotoneTable rejects malformed node data") {
  CHECK_THROWS_AS(MonotoneTable::from_values({0.0, 1.0}, {0.0, 1.0}), argument_error);
  CHECK_THROWS_AS(
      MonotoneTable::from_values({0.0, 2.0, 1.0, 3.0}, {0.0, 1.0, 2.0, 3.0}),
      argument_error);
  CHECK_THROWS_AS(
      MonotoneTable::from_values({0.0, 1.0, 2.0, 3.0}, {0.0, 2.0, 1.0, 3.0}),
      argument_error);
}

TEST_CASE("halton_points produces the classic base-2/3 pattern inside the box") {
  Eigen::VectorXd lo = vec2(0.0, 0.0), hi = vec2(1.0, 1.0);
  Eigen::MatrixXd pts = halton_points(lo, hi, 4);
  REQUIRE(pts.rows() == 4);
  REQUIRE(pts.cols() == 2);
  CHECK(pts(0, 0) == doctest::Approx(0.5));
  CHECK(pts(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(pts(1, 0) == doctest::Approx(0.25));
  CHECK(pts(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(pts(2, 0) == doctest::Approx(0.75));
  CHECK(pts(2, 1) == doctest::Approx(1.0 / 9.0));

  Eigen::VectorXd lo4 = Eigen::VectorXd::Constant(4, -1.0);
  Eigen::VectorXd hi4 = Eigen::VectorXd::Constant(4, 2.0);
  Eigen::MatrixXd pts4 = halton_points(lo4, hi4, 100);
  REQUIRE(pts4.rows() == 100);
  for (int i = 0; i < pts4.rows(); ++i) {
    CHECK((pts4.row(i).transpose().array() > lo4.array()).all());
    CHECK((pts4.row(i).transpose().array() < hi4.array()).all());
  }
}

TEST_CASE("default_test_points: centered grid in low dim, Halton in high dim") {
  Eigen::VectorXd lo = vec2(0.0, 0.0), hi = vec2(1.0, 1.0);
  Eigen::MatrixXd grid = default_test_points(lo, hi);
  CHECK(grid.rows() == 25);  // 5^2
  for (int i = 0; i < grid.rows(); ++i) {
    CHECK((grid.row(i).transpose().array() > lo.array()).all());
    CHECK((grid.row(i).transpose().array() < hi.array()).all());
  }
  Eigen::VectorXd lo4 = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd hi4 = Eigen::VectorXd::Ones(4);
  CHECK(default_test_points(lo4, hi4, 321).rows() == 321);
}

TEST_CASE("pairwise_sum is deterministic and accurate on long reductions") {
  std::vector<double> v(1 << 20, 0.1);
  double s1 = pairwise_sum(v.data(), v.size());
  double s2 = pairwise_sum(v.data(), v.size());
  CHECK(s1 == s2);
  CHECK(s1 == doctest::Approx(0.1 * static_cast<double>(v.size())).epsilon(1e-12));
  CHECK(pairwise_mean(v) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pairwise_sum(v.data(), 0) == 0.0);
}

TEST_CASE("mean_and_stderr matches the closed-form sample statistics") {
  std::vector<double> v = {1.0, 2.0, 3.0, 4.0, 5.0};
  MeanStderr ms = mean_and_stderr(v);
  CHECK(ms.mean == doctest::Approx(3.0));
  // Sample variance 2.5, so the standard error is sqrt(2.5 / 5).
  CHECK(ms.standard_error == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("det_small and log_abs_det agree with LU across sizes") {
  RngStream rng(17);
  for (int d = 1; d <= 5; ++d) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    double ref = m.determinant();
    CHECK(det_small(m) == doctest::Approx(ref).epsilon(1e-10));
    CHECK(log_abs_det(m) == doctest::Approx(std::log(std::abs(ref))).epsilon(1e-10));
  }
  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(3, 3);
  CHECK(log_abs_det(singular) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("worker_count honors the thread cap environment variable") {
  setenv("ICA_LAB_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  setenv("ICA_LAB_THREADS", "3", 1);
  CHECK(worker_count() >= 1);
  CHECK(worker_count() <= 3);
  unsetenv("ICA_LAB_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("parallel_for computes position-addressed results under any cap") {
  for (const char* cap : {"1", "4"}) {
    setenv("ICA_LAB_THREADS", cap, 1);
    std::vector<double> out(257, 0.0);
    parallel_for(static_cast<int>(out.size()),
                 [&](int i) { out[i] = static_cast<double>(i) * i; });
    for (int i = 0; i < static_cast<int>(out.size()); ++i)
      CHECK(out[i] == static_cast<double>(i) * i);
  }
  unsetenv("ICA_LAB_THREADS");
  CHECK_NOTHROW(parallel_for(0, [](int) { FAIL("must not be called"); }));
}

TEST_CASE("RngStream is reproducible and substreams are distinct") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  RngStream s1 = RngStream::substream(42, "data", 0);
  RngStream s2 = RngStream::substream(42, "data", 1);
  RngStream s3 = RngStream::substream(42, "metrics", 0);
  double v1 = s1.uniform(), v2 = s2.uniform(), v3 = s3.uniform();
  CHECK(v1 != v2);
  CHECK(v1 != v3);
  RngStream s1b = RngStream::substream(42, "data", 0);
  CHECK(s1b.uniform() == v1);
}

TEST_CASE("RngStream draws respect their ranges") {
  RngStream rng(7);
  for (int i = 0; i < 2000; ++i) {
    double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    double w = rng.uniform(-2.0, 3.0);
    CHECK(w >= -2.0);
    CHECK(w < 3.0);
    CHECK(rng.uniform_int(7) < 7);
  }
}

TEST_CASE("RngStream normals have the right first two moments") {
  RngStream rng(123);
  const int n = 40000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  // 4 standard errors: SE(mean) = 1/sqrt(n), SE(var) ~ sqrt(2/n).
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}
