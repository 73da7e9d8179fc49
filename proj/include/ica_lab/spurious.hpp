#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ica_lab/density.hpp"
#include "ica_lab/maps.hpp"
#include "ica_lab/smooth_map.hpp"
#include "ica_lab/vector_field.hpp"

namespace ica_lab {

/// Smooth bump on [0, 1): exp(1 - 1/(1 - s^2)) for s in [0,1), 0 beyond.
/// Equals 1 at s = 0 and vanishes with all derivatives at s = 1.
double bump(double s);
double bump_derivative(double s);

/// Radius-dependent rotation inside the unit cube: points rotate in the
/// (i, j) plane around `center` by an angle  theta(t, r) = amplitude * t *
/// bump(r / cutoff), so the motion dies off smoothly before the boundary.
/// Every time slice is an exact-volume-preserving diffeomorphism that fixes
/// the cube boundary.
struct RadiusRotationProfile {
  Eigen::VectorXd center;
  int plane_i = 0, plane_j = 1;
  double amplitude = 1.0;
  double cutoff = 0.0;  // <= distance(center, cube boundary); 0 = use that distance

  /// Validates the fields; fills cutoff when left at 0.
  static RadiusRotationProfile make(Eigen::VectorXd center, int plane_i = 0,
                                    int plane_j = 1, double amplitude = 1.0,
                                    double cutoff = 0.0);

  double angle(double t, double r) const;
  double dangle_dr(double t, double r) const;

  /// The time-t slice as an invertible map with analytic Jacobian.
  MapPtr map_at(double t) const;
  /// The generating vector field (time-independent, compact support).
  FieldPtr generator() const;
};

/// Divergence-free field from a density: component i carries +d_j p, component
/// j carries -d_i p, all others vanish.  Requires 0 <= i < j < d.
FieldPtr build_xij(DensityPtr density, int i, int j);

/// Compactly supported scalar bump  phi(x) = amplitude * bump(|x - c| / radius).
class RadialBump {
 public:
  RadialBump(Eigen::VectorXd center, double radius, double amplitude = 1.0);
  int dim() const { return static_cast<int>(center_.size()); }
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Domain support() const { return Domain::ball(center_, radius_); }

 private:
  Eigen::VectorXd center_;
  double radius_, amplitude_;
};

/// Divergence-free field with compact support, rotating the gradient of a
/// radial bump within the (i, j) plane.
FieldPtr build_compact_divfree(const RadialBump& phi, int i, int j);

/// Time-t flow of a vector field packaged as a SmoothMap.  The inverse
/// integrates backwards; the Jacobian is by finite differences.
MapPtr flow_map(FieldPtr field, double t, int steps = 0);

/// Measure-preservation check: compares the pushforward of `density` under
/// `map` against `density` itself at each point,
///   | p(f^{-1}(x)) / |det Df(f^{-1}(x))|  -  p(x) |  <=  tol * max(p(x), floor).
struct MptReport {
  bool pass = false;
  double tol = 0.0;
  double max_relative_residual = 0.0;
  int n_points = 0;
  std::vector<double> residuals;
  Eigen::VectorXd worst_point;
};

MptReport verify_mpt(const SmoothMap& map, const Density& density,
                     const Eigen::MatrixXd& points, double tol);

// ---------------------------------------------------------------------------
// Polar reparameterization construction

/// Options for build_polar_reparam.
struct PolarReparamOptions {
  bool tabulated = true;       // table-backed transforms vs direct quadrature
  double angular_margin = 1e-3;
  double unit_margin = 1e-6;   // shrink of the open unit cube domain
};

/// Builds the measure-transporting map  Phi_pol ∘ h : (0,1)^d -> R^d  that
/// carries the uniform cube law to the rotation-invariant law of `radial`,
/// coordinatewise monotone in the cube factor, with orthogonal-column
/// Jacobian everywhere.  d >= 2.
MapPtr build_polar_reparam(const RadialDensity& radial,
                           const PolarReparamOptions& opts = {});

/// The rotated family R ∘ f for a fixed orthogonal R; each member transports
/// the same law (rotation invariance) yet differs from f as a map.
MapPtr rotate_member(MapPtr f, const Eigen::MatrixXd& rotation);

/// Angular coordinate transform u -> h_k(g_k(pi) * u) used for the k-th
/// colatitude, where g_k(theta) = int_0^theta sin^k and h_k is its inverse.
/// Exposed for direct testing.
struct AngularTransform {
  std::function<double(double)> forward;   // u in (0,1) -> theta in (0,pi)
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;   // theta -> u
  double g_total = 0.0;                    // g_k(pi)
};
AngularTransform make_angular_transform(int k, bool tabulated = true);

}  // namespace ica_lab
