#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ica_lab/smooth_map.hpp"
#include "ica_lab/vector_field.hpp"

namespace ica_lab {

/// A one-parameter family Phi_t of candidate maps around a base map f0,
/// optionally compared against a drifting reference family f_t (defaults to
/// the constant family f_t = f0).  Phi_0 should equal f_0.
struct Deformation {
  MapPtr f0;
  std::function<MapPtr(double)> deformed;    // Phi_t
  std::function<MapPtr(double)> reference;   // f_t; null means constant f0

  MapPtr reference_at(double t) const {
    return reference ? reference(t) : f0;
  }
};

/// Recovers the latent-space generator of the deformation at time t: with
/// Psi_tau = f_tau^{-1} ∘ Phi_tau, returns the frozen field
///   X(x) = [Psi_{t+dt}(s) - Psi_{t-dt}(s)] / (2 dt),   s = Psi_t^{-1}(x).
/// Both families must be invertible in a neighborhood of t.
FieldPtr extract_generator(const Deformation& def, double t, double dt = 1e-4);

struct OctConstraintOptions {
  double fd_step = 1e-5;
  double first_order_tol = 1e-6;
  double divergence_tol = 1e-7;
  double precheck_tol = 1e-6;   // how orthogonal f0's Jacobian columns must be
  double t = 0.0;               // field time at which residuals are taken
};

/// Residuals of the linear compatibility system a generator must satisfy for
/// the deformed family to stay within the orthogonal-column class around f0:
/// for every coordinate pair i < j,
///   Lambda_i d_j X_i + Lambda_j d_i X_j = 0,   Lambda_k = |column_k(Df0)|^2,
/// and Div X = 0.  Residuals are scaled by sqrt(Lambda_i Lambda_j) and the
/// field's sup-norm, so they are dimensionless.
struct ConstraintReport {
  int d = 0;
  bool first_order_pass = false;
  bool divergence_pass = false;
  double first_order_max = 0.0;   // max over pairs and points
  double divergence_max = 0.0;    // max over points, sup-norm scaled
  Eigen::MatrixXd pair_residual;  // symmetric, zero diagonal
  double field_sup_norm = 0.0;
  OctConstraintOptions options;
};

ConstraintReport oct_constraint_residual(const SmoothMap& f0, const VectorField& X,
                                         const Eigen::MatrixXd& points,
                                         const OctConstraintOptions& opts = {});

/// Residual of the decoupled second-order equation for component `coord`:
///   d_i^2 X_i - sum_{j != i} d_j ( (Lambda_i / Lambda_j) d_j X_i ) = 0
/// evaluated with nested central differences of width h (outer staggered on
/// the inner).  Returns the largest absolute residual over the points.
double wave_residual(const SmoothMap& f0, const VectorField& X, int coord,
                     const Eigen::MatrixXd& points, double h = 1e-3);

/// Largest field magnitude within distance eps of the unit-cube boundary
/// (sampled on all 2d near-boundary slabs).  Requires 0 < eps < 0.5.
double boundary_vanishing(const VectorField& X, double eps, int n_samples = 512,
                          std::uint64_t seed = 0);

/// Resonance diagnostic for separable modes of the second-order system on
/// the cube with constant column norms mu:  alpha is the frequency that
/// coordinate i must carry to close a mode with integer counts m_j
/// elsewhere; the mode is resonant exactly when alpha is (numerically) a
/// nonnegative integer.
struct ResonanceResult {
  double alpha = 0.0;
  bool resonant = false;
};

ResonanceResult resonance_alpha(const Eigen::VectorXd& mu,
                                const Eigen::VectorXi& m, int i);

}  // namespace ica_lab
