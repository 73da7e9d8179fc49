#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ica_lab/errors.hpp"
#include "ica_lab/smooth_map.hpp"
#include "ica_lab/vector_field.hpp"

namespace ica_lab {

/// Shared numerical knobs.  Call sites may override per call; these are the
/// library-wide defaults.
struct ToleranceProfile {
  double fd_step = 1e-5;        // finite-difference step
  double residual_tol = 1e-6;   // generic residual acceptance
  double quad_tol = 1e-10;      // adaptive quadrature target
  double root_tol = 1e-12;      // 1-d root finding target
};

const ToleranceProfile& default_tolerances();

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference Jacobian of a raw callable; no domain checks.
template <class F>
Eigen::MatrixXd fd_jacobian_of(F&& f, const Eigen::VectorXd& x, double h) {
  if (h <= 0) throw argument_error("fd_jacobian: step must be positive");
  Eigen::VectorXd xp = x, xm = x;
  Eigen::VectorXd fp, fm;
  Eigen::MatrixXd jac;
  for (int j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    fp = f(xp);
    fm = f(xm);
    if (jac.size() == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  return jac;
}

/// Central-difference Jacobian of a map.  Requires x to sit inside the map's
/// domain with margin h so every probe point is valid.
Eigen::MatrixXd fd_jacobian(const SmoothMap& map, const Eigen::VectorXd& x,
                            double h = default_tolerances().fd_step);

/// Central-difference divergence of a vector field at (t, x).
double fd_divergence(const VectorField& field, double t, const Eigen::VectorXd& x,
                     double h = default_tolerances().fd_step);

// ---------------------------------------------------------------------------
// ODE flow

/// Integrates dx/dt = X(t, x) from (t0, x0) to t1 with `steps` fixed RK4
/// steps (t1 < t0 integrates backwards).  Throws integration_error with the
/// failure time if the state turns non-finite.
Eigen::VectorXd rk4_flow(const VectorField& field, const Eigen::VectorXd& x0,
                         double t0, double t1, int steps);

/// Default step count for a time span: 1000 steps per unit time, at least 16.
int rk4_default_steps(double t0, double t1);

// ---------------------------------------------------------------------------
// Quadrature and 1-d inversion

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol.
double quad_adaptive(const std::function<double(double)>& f, double a, double b,
                     double tol = default_tolerances().quad_tol);

/// Solves f(x) = y for a strictly increasing f on [lo, hi] by safeguarded
/// Newton (bisection fallback).  df may be null.  Throws range_error when y
/// lies outside [f(lo), f(hi)] beyond tolerance.
double inverse_monotone(const std::function<double(double)>& f, double y,
                        double lo, double hi,
                        double tol = default_tolerances().root_tol,
                        const std::function<double(double)>& df = nullptr);

/// Tabulated strictly increasing function with a monotone cubic (PCHIP)
/// interpolant; supports fast evaluation, derivative and inversion.
class MonotoneTable {
 public:
  MonotoneTable() = default;
  MonotoneTable(const std::function<double(double)>& f, double lo, double hi,
                int n = 2048);
  static MonotoneTable from_values(std::vector<double> x, std::vector<double> y);

  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  double y_lo() const { return y_.front(); }
  double y_hi() const { return y_.back(); }

  double value(double x) const;
  double derivative(double x) const;
  double inverse(double y) const;

 private:
  void build_slopes();
  int segment_of(double x) const;

  std::vector<double> x_, y_, m_;  // nodes, values, node slopes
};

// ---------------------------------------------------------------------------
// Point sets

/// First n points of the Halton sequence scaled into the box [lo, hi]
/// (index starts at 1 to skip the origin).
Eigen::MatrixXd halton_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              int n);

/// Default evaluation points in a box: the centered 5^d grid when d <= 3,
/// otherwise `n_high_dim` Halton points.  Rows are points.
Eigen::MatrixXd default_test_points(const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi,
                                    int n_high_dim = 500);

// ---------------------------------------------------------------------------
// Reductions and determinants

/// Pairwise (cascade) sum; deterministic and accurate for long reductions.
double pairwise_sum(const double* data, std::size_t n);
double pairwise_mean(const std::vector<double>& v);

struct MeanStderr {
  double mean = 0.0;
  double standard_error = 0.0;
};
MeanStderr mean_and_stderr(const std::vector<double>& v);

/// Determinant of a small dense matrix: closed form for d <= 3, LU beyond.
double det_small(const Eigen::MatrixXd& m);

/// log |det M| (closed form d <= 3, LU beyond).  Returns -inf for singular M.
double log_abs_det(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Worker pool

/// Number of workers honoring the ICA_LAB_THREADS cap (>= 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads.  Results must
/// be written positionally by the callee so the outcome does not depend on
/// the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace ica_lab
