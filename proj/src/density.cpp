#include "ica_lab/density.hpp"

#include <cmath>
#include <limits>

namespace ica_lab {

double Density::log_value(const Eigen::VectorXd& x) const {
  return std::log(value(x));
}

double unit_ball_volume(int d) {
  if (d < 1 || d > 16) throw argument_error("unit_ball_volume: dimension out of range");
  return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// ---------------------------------------------------------------------------
// GaussianDensity

GaussianDensity::GaussianDensity(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const int d = static_cast<int>(mean_.size());
  if (d < 1 || cov_.rows() != d || cov_.cols() != d)
    throw argument_error("GaussianDensity: shape mismatch");
  llt_.compute(cov_);
  if (llt_.info() != Eigen::Success)
    throw argument_error("GaussianDensity: covariance not positive definite");
  double log_det = 0.0;
  for (int i = 0; i < d; ++i)
    log_det += 2.0 * std::log(llt_.matrixL()(i, i));
  log_norm_ = -0.5 * (d * std::log(2.0 * M_PI) + log_det);
}

std::shared_ptr<GaussianDensity> GaussianDensity::standard(int d) {
  return std::make_shared<GaussianDensity>(Eigen::VectorXd::Zero(d),
                                           Eigen::MatrixXd::Identity(d, d));
}

double GaussianDensity::log_value(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw argument_error("GaussianDensity: dimension mismatch");
  Eigen::VectorXd c = x - mean_;
  double quad = c.dot(llt_.solve(c));
  return log_norm_ - 0.5 * quad;
}

double GaussianDensity::value(const Eigen::VectorXd& x) const {
  return std::exp(log_value(x));
}

Eigen::VectorXd GaussianDensity::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd c = x - mean_;
  return -value(x) * llt_.solve(c);
}

// ---------------------------------------------------------------------------
// GaussianMixtureDensity

GaussianMixtureDensity::GaussianMixtureDensity(
    std::vector<double> weights,
    std::vector<std::shared_ptr<GaussianDensity>> comps)
    : weights_(std::move(weights)), comps_(std::move(comps)) {
  if (weights_.empty() || weights_.size() != comps_.size())
    throw argument_error("GaussianMixtureDensity: weights/components mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0)) throw argument_error("GaussianMixtureDensity: weights must be positive");
    total += w;
  }
  for (double& w : weights_) w /= total;
  for (const auto& c : comps_) {
    if (!c) throw argument_error("GaussianMixtureDensity: null component");
    if (c->dim() != comps_.front()->dim())
      throw argument_error("GaussianMixtureDensity: mixed dimensions");
  }
}

int GaussianMixtureDensity::dim() const { return comps_.front()->dim(); }

double GaussianMixtureDensity::value(const Eigen::VectorXd& x) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < comps_.size(); ++k)
    acc += weights_[k] * comps_[k]->value(x);
  return acc;
}

Eigen::VectorXd GaussianMixtureDensity::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
  for (std::size_t k = 0; k < comps_.size(); ++k)
    acc += weights_[k] * comps_[k]->gradient(x);
  return acc;
}

// ---------------------------------------------------------------------------
// ClosureDensity

ClosureDensity::ClosureDensity(int d, ValueFn value, GradFn grad)
    : d_(d), value_(std::move(value)), grad_(std::move(grad)) {
  if (d_ < 1 || d_ > 16) throw argument_error("ClosureDensity: dimension out of range");
  if (!value_) throw argument_error("ClosureDensity: missing value function");
}

Eigen::VectorXd ClosureDensity::gradient(const Eigen::VectorXd& x) const {
  if (grad_) return grad_(x);
  const double h = default_tolerances().fd_step;
  Eigen::VectorXd g(d_), xp = x, xm = x;
  for (int i = 0; i < d_; ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (value_(xp) - value_(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return g;
}

// ---------------------------------------------------------------------------
// RadialDensity

namespace {
constexpr double kTailMass = 1e-10;
}

RadialDensity::RadialDensity(int d, std::function<double(double)> profile,
                             double lo, double hi, int table_size)
    : d_(d), profile_(std::move(profile)), lo_(lo), hi_(hi) {
  if (d_ < 1 || d_ > 16) throw argument_error("RadialDensity: dimension out of range");
  if (!profile_) throw argument_error("RadialDensity: missing profile");
  if (!(lo_ >= 0.0) || !(hi_ > lo_))
    throw argument_error("RadialDensity: requires 0 <= lo < hi");
  omega_d_ = unit_ball_volume(d_);

  auto weight = [this](double r) {
    double p = profile_(r);
    if (p < 0) throw argument_error("RadialDensity: profile must be nonnegative");
    return d_ * omega_d_ * std::pow(r, d_ - 1) * p;
  };

  // Bracket the support: for an unbounded profile, double the end until the
  // marginal shell mass becomes negligible.
  double upper = hi_;
  if (!std::isfinite(upper)) {
    double b = std::max(2.0, 2.0 * lo_ + 2.0);
    double mass = quad_adaptive(weight, lo_, b, 1e-8);
    int doublings = 0;
    for (; doublings < 48; ++doublings) {
      double shell = quad_adaptive(weight, b, 2.0 * b, 1e-12);
      mass += shell;
      b *= 2.0;
      if (shell <= 1e-13 * std::max(mass, 1e-300)) break;
    }
    if (doublings == 48)
      throw precision_error("RadialDensity: radial mass does not concentrate");
    upper = b;
  }

  // Tabulate the cumulative radial mass on [lo, upper].
  const int n = std::max(table_size, 64);
  std::vector<double> xs(n), cum(n);
  double acc = 0.0;
  xs[0] = lo_;
  cum[0] = 0.0;
  for (int i = 1; i < n; ++i) {
    xs[i] = lo_ + (upper - lo_) * static_cast<double>(i) / (n - 1);
    acc += quad_adaptive(weight, xs[i - 1], xs[i], 1e-13 + 1e-12 / n);
    cum[i] = acc;
  }
  z_ = acc;
  if (!(z_ > 0) || !std::isfinite(z_))
    throw argument_error("RadialDensity: profile has no mass");
  cdf_table_ = MonotoneTable::from_values(std::move(xs), std::move(cum));

  // Truncate an infinite support where all but kTailMass of the law lives.
  if (!std::isfinite(hi_))
    hi_ = cdf_table_.inverse((1.0 - kTailMass) * z_);
  else
    hi_ = upper;
}

RadialDensity RadialDensity::gaussian(int d) {
  double c = std::pow(2.0 * M_PI, -0.5 * d);
  return RadialDensity(
      d, [c](double r) { return c * std::exp(-0.5 * r * r); }, 0.0,
      std::numeric_limits<double>::infinity());
}

RadialDensity RadialDensity::annulus(int d, double lo, double hi) {
  if (!(0.0 <= lo && lo < hi) || !std::isfinite(hi))
    throw argument_error("RadialDensity::annulus: bad shell bounds");
  double vol = unit_ball_volume(d) * (std::pow(hi, d) - std::pow(lo, d));
  double c = 1.0 / vol;
  return RadialDensity(d, [c](double) { return c; }, lo, hi);
}

double RadialDensity::density_value(double r) const {
  if (r < lo_ || r > cdf_table_.hi()) return 0.0;
  return profile_(r) / z_;
}

double RadialDensity::radial_value(double r) const {
  if (r < lo_ || r > cdf_table_.hi()) return 0.0;
  return d_ * omega_d_ * std::pow(r, d_ - 1) * profile_(r) / z_;
}

double RadialDensity::radial_cdf(double r, bool tabulated) const {
  if (r <= lo_) return 0.0;
  if (r >= cdf_table_.hi()) return 1.0;
  if (tabulated) return cdf_table_.value(r) / z_;
  auto weight = [this](double s) {
    return d_ * omega_d_ * std::pow(s, d_ - 1) * profile_(s);
  };
  return quad_adaptive(weight, lo_, r, default_tolerances().quad_tol) / z_;
}

double RadialDensity::radial_quantile(double u, bool tabulated) const {
  if (!(u > 0.0 && u < 1.0))
    throw argument_error("RadialDensity: quantile argument must lie in (0,1)");
  if (tabulated) return cdf_table_.inverse(u * z_);
  return inverse_monotone([this](double r) { return radial_cdf(r, false); }, u,
                          lo_, cdf_table_.hi(), 1e-13,
                          [this](double r) { return radial_value(r); });
}

DensityPtr RadialDensity::spatial_density() const {
  auto self = std::make_shared<RadialDensity>(*this);
  auto value = [self](const Eigen::VectorXd& x) {
    return self->density_value(x.norm());
  };
  auto grad = [self](const Eigen::VectorXd& x) {
    double r = x.norm();
    if (r < 1e-12 || r < self->lo_ || r > self->cdf_table_.hi())
      return Eigen::VectorXd::Zero(x.size()).eval();
    double h = std::min(1e-6, 0.5 * (self->cdf_table_.hi() - self->lo_));
    double lo_pt = std::max(r - h, self->lo_);
    double hi_pt = std::min(r + h, self->cdf_table_.hi());
    double dp = (self->profile_(hi_pt) - self->profile_(lo_pt)) /
                ((hi_pt - lo_pt) * self->z_);
    return ((dp / r) * x).eval();
  };
  return std::make_shared<ClosureDensity>(d_, value, grad);
}

}  // namespace ica_lab
