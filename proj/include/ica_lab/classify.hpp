#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ica_lab/smooth_map.hpp"

namespace ica_lab {

/// Which structural property of the Jacobian a classification checked.
enum class MapClass { Conformal, Oct, VolumePreserving };

std::string to_string(MapClass c);

/// Outcome of probing one structural property over a point set.  Residuals
/// are dimensionless (relative) so one tolerance works across scales.
struct ClassReport {
  MapClass tested = MapClass::Conformal;
  bool pass = false;
  double tol = 0.0;
  double max_residual = 0.0;
  int n_points = 0;

  struct Offender {
    Eigen::VectorXd point;
    double residual = 0.0;
  };
  std::vector<Offender> worst;  // up to 5, residual-descending

  /// Residual per probed point, in input row order.
  std::vector<double> residuals;
};

/// Conformality: J^T J = lambda(x) I with lambda(x) = trace(J^T J)/d; the
/// residual is max|J^T J - lambda I| / max(1, lambda).
ClassReport classify_conformal(const SmoothMap& map, const Eigen::MatrixXd& points,
                               double tol);

/// Orthogonal-columns property: J^T J diagonal; residual is the largest
/// off-diagonal Gram entry normalized by the two column norms.
ClassReport classify_oct(const SmoothMap& map, const Eigen::MatrixXd& points,
                         double tol);

/// Unit-Jacobian-determinant property; residual is |det J - 1|.
ClassReport classify_volume_preserving(const SmoothMap& map,
                                       const Eigen::MatrixXd& points, double tol);

}  // namespace ica_lab
