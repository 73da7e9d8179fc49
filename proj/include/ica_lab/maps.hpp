#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "ica_lab/smooth_map.hpp"

namespace ica_lab {

/// Affine map x -> A x + b with analytic Jacobian; invertible when A is.
class LinearMap final : public SmoothMap {
 public:
  LinearMap(Eigen::MatrixXd a, Eigen::VectorXd b);
  explicit LinearMap(Eigen::MatrixXd a);

  /// Planar rotation by `angle` in coordinates (i, j) of R^d.
  static std::shared_ptr<LinearMap> rotation(int d, int i, int j, double angle);
  /// Haar-ish random orthogonal matrix (QR of a Gaussian matrix).
  static Eigen::MatrixXd random_orthogonal(int d, std::uint64_t seed);

  int dim() const override { return static_cast<int>(b_.size()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override {
    return a_ * x + b_;
  }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return a_; }
  bool has_inverse() const override { return invertible_; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd&) const override;
  std::string name() const override { return "linear"; }

  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::VectorXd& offset() const { return b_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool invertible_ = false;
  double log_abs_det_ = 0.0;
};

/// Sphere-inversion family  x -> b + alpha A (x-a) / |x-a|^eps  with
/// A orthogonal and eps in {0, 2}.  eps = 0 is the affine member; eps = 2
/// inverts through the sphere around `a` and is singular there, so its
/// domain excludes a small ball of radius `r_min`.
class MoebiusMap final : public SmoothMap {
 public:
  MoebiusMap(Eigen::VectorXd a, Eigen::VectorXd b, double alpha,
             Eigen::MatrixXd rotation, int eps, double r_min = 1e-6);

  /// Pure inversion through the unit sphere at the origin.
  static std::shared_ptr<MoebiusMap> inversion(int d);

  int dim() const override { return static_cast<int>(a_.size()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  bool has_inverse() const override { return true; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd& x) const override;
  std::string name() const override { return "moebius"; }

  int eps() const { return eps_; }
  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& rotation_matrix() const { return rot_; }

 private:
  Eigen::VectorXd offset(const Eigen::VectorXd& x) const;  // x - a with guard

  Eigen::VectorXd a_, b_;
  double alpha_;
  Eigen::MatrixXd rot_;
  int eps_;
  double r_min_;
};

/// Evaluation and analytic Jacobian in one call.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> moebius_eval_and_jacobian(
    const MoebiusMap& map, const Eigen::VectorXd& x);

/// Spherical-coordinate chart (r, phi, theta_1, ..., theta_{d-2}) -> R^d:
///   x_1 = r sin(phi) sin(theta_1) ... sin(theta_{d-2})
///   x_2 = r cos(phi) sin(theta_1) ... sin(theta_{d-2})
///   x_k = r cos(theta_{k-2})       (k >= 3)
/// Defined on (r_lo, r_hi) x (0, 2*pi) x (margin, pi - margin)^{d-2};
/// the margin keeps evaluations away from the degenerate axes.
class PolarMap final : public SmoothMap {
 public:
  PolarMap(int d, double r_lo, double r_hi, double angular_margin = 1e-3);

  int dim() const override { return d_; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& c) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& c) const override;
  bool has_inverse() const override { return true; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& x) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd& c) const override;
  std::string name() const override { return "polar"; }

  /// Signed determinant in closed form:
  /// (-1)^{d-1} r^{d-1} prod_k sin^k(theta_k).
  double det_analytic(const Eigen::VectorXd& c) const;

 private:
  void check(const Eigen::VectorXd& c) const;
  int d_;
  double r_lo_, r_hi_, margin_;
};

/// Coordinatewise strictly monotone reparameterization, optionally followed
/// by a signed permutation:  y_i = sign_i * f_{perm_i}(x_{perm_i}).
class CoordwiseReparam final : public SmoothMap {
 public:
  struct Monotone1d {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> finv;  // may be null
    double lo = 0.0, hi = 1.0;           // open domain interval
  };

  explicit CoordwiseReparam(std::vector<Monotone1d> comps);
  CoordwiseReparam(std::vector<Monotone1d> comps, std::vector<int> perm,
                   std::vector<int> signs);

  int dim() const override { return static_cast<int>(comps_.size()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  bool has_inverse() const override;
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd& x) const override;
  std::string name() const override { return "coordwise"; }

 private:
  void check(const Eigen::VectorXd& x) const;
  std::vector<Monotone1d> comps_;
  std::vector<int> perm_, signs_;
};

/// Block-diagonal concatenation of planar conformal maps: R^{2n} -> R^{2n},
/// each factor acting on one coordinate pair.
class ConcatConformal2D final : public SmoothMap {
 public:
  explicit ConcatConformal2D(std::vector<MapPtr> blocks);

  int dim() const override { return 2 * static_cast<int>(blocks_.size()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  bool has_inverse() const override;
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd& x) const override;
  std::string name() const override { return "concat2d"; }

 private:
  std::vector<MapPtr> blocks_;
};

/// Throws argument_error unless Q^T Q = I within `tol` (max entry).
void require_orthogonal(const Eigen::MatrixXd& q, double tol = 1e-10,
                        const std::string& who = "matrix");

}  // namespace ica_lab
