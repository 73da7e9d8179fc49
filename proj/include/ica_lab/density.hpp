#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "ica_lab/errors.hpp"
#include "ica_lab/numerics.hpp"

namespace ica_lab {

/// Smooth probability density on R^d with an analytic gradient.
class Density {
 public:
  virtual ~Density() = default;
  virtual int dim() const = 0;
  virtual double value(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  virtual double log_value(const Eigen::VectorXd& x) const;
};

using DensityPtr = std::shared_ptr<const Density>;

class GaussianDensity final : public Density {
 public:
  GaussianDensity(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static std::shared_ptr<GaussianDensity> standard(int d);

  int dim() const override { return static_cast<int>(mean_.size()); }
  double value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  double log_value(const Eigen::VectorXd& x) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_ = 0.0;
};

class GaussianMixtureDensity final : public Density {
 public:
  GaussianMixtureDensity(std::vector<double> weights,
                         std::vector<std::shared_ptr<GaussianDensity>> comps);

  int dim() const override;
  double value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;

 private:
  std::vector<double> weights_;
  std::vector<std::shared_ptr<GaussianDensity>> comps_;
};

/// Density given by user closures (gradient optional: falls back to central
/// differences with the default step).
class ClosureDensity final : public Density {
 public:
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  ClosureDensity(int d, ValueFn value, GradFn grad = nullptr);

  int dim() const override { return d_; }
  double value(const Eigen::VectorXd& x) const override { return value_(x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;

 private:
  int d_;
  ValueFn value_;
  GradFn grad_;
};

/// Rotation-invariant density built from a radial profile p(r) on (lo, hi).
/// Internally normalizes the radial law q(r) ∝ d * omega_d * r^{d-1} p(r),
/// truncating an infinite upper end where the tail mass drops below 1e-10,
/// and tabulates the CDF for fast quantiles.
class RadialDensity {
 public:
  RadialDensity(int d, std::function<double(double)> profile, double lo,
                double hi, int table_size = 2048);

  static RadialDensity gaussian(int d);
  /// Constant profile supported on the shell lo < r < hi.
  static RadialDensity annulus(int d, double lo, double hi);

  int dim() const { return d_; }
  double lo() const { return lo_; }
  /// Effective (possibly truncated) upper end of the radial support.
  double hi() const { return hi_; }
  /// Last tabulated radius (>= hi(); where the CDF table ends).
  double table_end() const { return cdf_table_.hi(); }
  double omega_d() const { return omega_d_; }
  /// Mass of the un-normalized radial law; q integrates to 1 after division.
  double normalization() const { return z_; }

  /// Normalized full-space density value p(|x|) / Z at radius r.
  double density_value(double r) const;
  /// Normalized radial law q(r) = d * omega_d * r^{d-1} p(r) / Z.
  double radial_value(double r) const;
  /// CDF of q.  `tabulated` switches between the table and direct quadrature.
  double radial_cdf(double r, bool tabulated = true) const;
  /// Quantile of q (inverse CDF) on (0, 1).
  double radial_quantile(double u, bool tabulated = true) const;

  /// The induced density on R^d (value/gradient; gradient by differencing
  /// the profile).
  DensityPtr spatial_density() const;

 private:
  int d_;
  std::function<double(double)> profile_;
  double lo_, hi_;
  double omega_d_, z_;
  MonotoneTable cdf_table_;
};

/// Unit-ball volume omega_d = pi^{d/2} / Gamma(d/2 + 1).
double unit_ball_volume(int d);

}  // namespace ica_lab
