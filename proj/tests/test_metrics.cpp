#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "ica_lab/density.hpp"
#include "ica_lab/maps.hpp"
#include "ica_lab/metrics.hpp"
#include "ica_lab/rng.hpp"

using namespace ica_lab;

namespace {

Eigen::VectorXd vecd(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

SampleBatch normal_batch(int n, int d, uint64_t seed) {
  RngStream rng(seed);
  SampleBatch batch;
  batch.points.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) batch.points(i, j) = rng.normal();
  return batch;
}

}  // namespace

TEST_CASE("c_oct_pointwise hits the shear closed form and the OCT zero") {
  Eigen::MatrixXd shear(2, 2);
  shear << 1.0, 1.0, 0.0, 1.0;
  // Columns have norms 1 and sqrt(2); det = 1: defect = log sqrt(2).
  CHECK(std::abs(c_oct_pointwise(shear) - 0.5 * std::log(2.0)) < 1e-12);

  Eigen::MatrixXd rot = LinearMap::rotation(2, 0, 1, 0.7)->matrix();
  CHECK(c_oct_pointwise(rot) == doctest::Approx(0.0).epsilon(1e-14));
  Eigen::MatrixXd diag(3, 3);
  diag.setZero();
  diag.diagonal() << 2.0, 0.5, 7.0;
  CHECK(c_oct_pointwise(diag) == doctest::Approx(0.0).epsilon(1e-13));

  // Any invertible Jacobian has a nonnegative defect (Hadamard).
  RngStream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(3, 3);
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.normal();
    if (std::abs(m.determinant()) < 1e-6) continue;
    CHECK(c_oct_pointwise(m) >= -1e-12);
  }
}

TEST_CASE("c_oct_pointwise rejects singular Jacobians") {
  CHECK_THROWS_AS(c_oct_pointwise(Eigen::MatrixXd::Zero(2, 2)), singularity_error);
  Eigen::MatrixXd rank1(2, 2);
  rank1 << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(c_oct_pointwise(rank1), singularity_error);
}

TEST_CASE("c_oct of a map averages the pointwise defect") {
  Eigen::MatrixXd sh(2, 2);
  sh << 1.0, 1.0, 0.0, 1.0;
  LinearMap shear{sh};
  SampleBatch batch = normal_batch(500, 2, 10);
  MetricEstimate est = c_oct(shear, batch);
  // Constant integrand: exact value, zero spread.
  CHECK(est.value == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(est.standard_error < 1e-12);
  CHECK(est.n_samples == 500);
  CHECK(est.n_excluded == 0);

  PolarMap polar(2, 0.5, 4.0);
  SampleBatch chart;
  chart.points.resize(50, 2);
  RngStream rng(11);
  for (int i = 0; i < 50; ++i) {
    chart.points(i, 0) = rng.uniform(0.7, 3.5);
    chart.points(i, 1) = rng.uniform(0.2, 6.0);
  }
  CHECK(c_oct(polar, chart).value < 1e-8);
}

TEST_CASE("c_oct excludes bad points but aborts when too many fail") {
  PolarMap polar(2, 0.5, 4.0);
  SampleBatch mostly_good;
  mostly_good.points.resize(300, 2);
  RngStream rng(12);
  for (int i = 0; i < 300; ++i) {
    mostly_good.points(i, 0) = rng.uniform(0.7, 3.5);
    mostly_good.points(i, 1) = rng.uniform(0.2, 6.0);
  }
  mostly_good.points(7, 0) = 10.0;  // outside the chart
  MetricOptions opts;
  opts.max_excluded_fraction = 0.05;
  MetricEstimate est = c_oct(polar, mostly_good, opts);
  CHECK(est.n_excluded == 1);
  CHECK(est.n_samples == 299);

  SampleBatch mostly_bad = mostly_good;
  for (int i = 0; i < 100; ++i) mostly_bad.points(i, 0) = 10.0;
  CHECK_THROWS_AS(c_oct(polar, mostly_bad, opts), estimation_error);
}

TEST_CASE("l1_recon of a quarter turn equals the Gaussian chord length") {
  // g_inv = identity, f = rotation by pi/2: |f(s) - s| = sqrt(2) |s|, and
  // E sqrt(2)|s| = sqrt(pi) for a planar standard normal.
  auto f = LinearMap::rotation(2, 0, 1, M_PI / 2.0);
  LinearMap identity{Eigen::MatrixXd::Identity(2, 2)};
  SampleBatch batch = normal_batch(40000, 2, 21);
  MetricEstimate est = l1_recon(identity, *f, batch);
  CHECK(std::abs(est.value - std::sqrt(M_PI)) < 4.0 * est.standard_error);
  CHECK(est.standard_error > 0.0);
  CHECK(est.standard_error < 0.01);

  // Perfect reconstruction: the inverse of f undoes f exactly.
  auto f_inv = LinearMap::rotation(2, 0, 1, -M_PI / 2.0);
  MetricEstimate zero = l1_recon(*f_inv, *f, batch);
  CHECK(zero.value < 1e-12);
}

TEST_CASE("forward_kl recovers closed-form Gaussian divergences") {
  RngStream rng(31);
  auto standard = GaussianDensity::standard(2);

  // Target N(0, I) against model N(0, 4I):
  // KL = 0.5 (tr(1/4 I_2) - 2 + ln 16) = 0.5 (0.5 - 2 + ln 16).
  GaussianDensity wide(Eigen::VectorXd::Zero(2),
                       Eigen::MatrixXd(4.0 * Eigen::MatrixXd::Identity(2, 2)));
  TargetSampler sample_standard = [&](RngStream& r) {
    Eigen::VectorXd x(2);
    x << r.normal(), r.normal();
    return std::make_pair(x, standard->log_value(x));
  };
  double exact_wide = 0.5 * (0.5 - 2.0 + std::log(16.0));
  MetricEstimate kl1 = forward_kl(
      sample_standard, [&](const Eigen::VectorXd& x) { return wide.log_value(x); },
      100000, rng);
  CHECK(std::abs(kl1.value - exact_wide) < 3.0 * kl1.standard_error + 1e-4);

  // Unit mean shift of half a standard deviation per coordinate pattern:
  // KL(N(m, I) || N(0, I)) = |m|^2 / 2 = 0.125 for m = (0.5, 0).
  GaussianDensity shifted(vecd({0.5, 0.0}), Eigen::MatrixXd::Identity(2, 2));
  TargetSampler sample_shifted = [&](RngStream& r) {
    Eigen::VectorXd x(2);
    x << 0.5 + r.normal(), r.normal();
    return std::make_pair(x, shifted.log_value(x));
  };
  MetricEstimate kl2 = forward_kl(
      sample_shifted,
      [&](const Eigen::VectorXd& x) { return standard->log_value(x); }, 100000,
      rng);
  CHECK(std::abs(kl2.value - 0.125) < 3.0 * kl2.standard_error);

  // Identical distributions: zero within noise, and the noise is tiny.
  MetricEstimate kl3 = forward_kl(
      sample_standard,
      [&](const Eigen::VectorXd& x) { return standard->log_value(x); }, 1000, rng);
  CHECK(kl3.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("forward_kl enforces its sample floor") {
  RngStream rng(5);
  auto standard = GaussianDensity::standard(2);
  TargetSampler sampler = [&](RngStream& r) {
    Eigen::VectorXd x(2);
    x << r.normal(), r.normal();
    return std::make_pair(x, standard->log_value(x));
  };
  LogDensityFn model = [&](const Eigen::VectorXd& x) {
    return standard->log_value(x);
  };
  CHECK_THROWS_AS(forward_kl(sampler, model, 99, rng), argument_error);
  CHECK_NOTHROW(forward_kl(sampler, model, 100, rng));
}

TEST_CASE("forward_kl excludes non-finite model evaluations with accounting") {
  RngStream rng(6);
  auto standard = GaussianDensity::standard(2);
  TargetSampler sampler = [&](RngStream& r) {
    Eigen::VectorXd x(2);
    x << r.normal(), r.normal();
    return std::make_pair(x, standard->log_value(x));
  };
  // Model undefined on the right half plane beyond 2.2 sigma: rare enough
  // to stay under a generous exclusion cap, so the estimate still forms.
  LogDensityFn holey = [&](const Eigen::VectorXd& x) {
    if (x(0) > 2.2) return std::numeric_limits<double>::quiet_NaN();
    return standard->log_value(x);
  };
  MetricOptions opts;
  opts.max_excluded_fraction = 0.05;
  MetricEstimate est = forward_kl(sampler, holey, 5000, rng, opts);
  CHECK(est.n_excluded > 0);
  CHECK(est.n_samples + est.n_excluded == 5000);

  // With the default 1% cap the same model is rejected.
  RngStream rng2(6);
  CHECK_THROWS_AS(forward_kl(sampler, holey, 5000, rng2), estimation_error);
}

TEST_CASE("metric estimates are deterministic given the stream state") {
  auto f = LinearMap::rotation(2, 0, 1, 0.9);
  LinearMap identity{Eigen::MatrixXd::Identity(2, 2)};
  SampleBatch batch = normal_batch(2000, 2, 77);
  MetricEstimate a = l1_recon(identity, *f, batch);
  MetricEstimate b = l1_recon(identity, *f, batch);
  CHECK(a.value == b.value);
  CHECK(a.standard_error == b.standard_error);
}
