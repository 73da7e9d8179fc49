#include "ica_lab/spurious.hpp"

#include <cmath>

#include "ica_lab/classify.hpp"
#include "ica_lab/numerics.hpp"

namespace ica_lab {

double bump(double s) {
  s = std::abs(s);
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

double bump_derivative(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  double one_m = 1.0 - s * s;
  return bump(s) * (-2.0 * s / (one_m * one_m));
}

// ---------------------------------------------------------------------------
// RadiusRotationProfile

RadiusRotationProfile RadiusRotationProfile::make(Eigen::VectorXd center,
                                                  int plane_i, int plane_j,
                                                  double amplitude,
                                                  double cutoff) {
  const int d = static_cast<int>(center.size());
  if (d < 2 || d > 16)
    throw argument_error("RadiusRotationProfile: dimension out of range");
  if (plane_i < 0 || plane_j < 0 || plane_i >= d || plane_j >= d ||
      plane_i == plane_j)
    throw argument_error("RadiusRotationProfile: bad plane indices");
  if (!std::isfinite(amplitude))
    throw argument_error("RadiusRotationProfile: bad amplitude");
  double boundary_dist = 1.0;
  for (int i = 0; i < d; ++i)
    boundary_dist = std::min({boundary_dist, center(i), 1.0 - center(i)});
  if (boundary_dist <= 0.0)
    throw argument_error("RadiusRotationProfile: center must sit inside the unit cube");
  if (cutoff == 0.0) cutoff = boundary_dist;
  if (!(cutoff > 0.0) || cutoff > boundary_dist + 1e-12)
    throw argument_error("RadiusRotationProfile: cutoff exceeds the boundary distance");
  RadiusRotationProfile p;
  p.center = std::move(center);
  p.plane_i = plane_i;
  p.plane_j = plane_j;
  p.amplitude = amplitude;
  p.cutoff = cutoff;
  return p;
}

double RadiusRotationProfile::angle(double t, double r) const {
  return amplitude * t * bump(r / cutoff);
}

double RadiusRotationProfile::dangle_dr(double t, double r) const {
  return amplitude * t * bump_derivative(r / cutoff) / cutoff;
}

namespace {

class RadiusRotationMap final : public SmoothMap {
 public:
  RadiusRotationMap(RadiusRotationProfile profile, double t)
      : profile_(std::move(profile)), t_(t) {
    set_domain(Domain::all(static_cast<int>(profile_.center.size())));
  }

  int dim() const override { return static_cast<int>(profile_.center.size()); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& s) const override {
    return rotate(s, +1.0);
  }

  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override {
    return rotate(y, -1.0);
  }
  bool has_inverse() const override { return true; }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& s) const override {
    const int i = profile_.plane_i, j = profile_.plane_j;
    Eigen::VectorXd y = s - profile_.center;
    double r = y.norm();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(dim(), dim());
    if (r >= profile_.cutoff) return jac;
    double th = profile_.angle(t_, r);
    double c = std::cos(th), sn = std::sin(th);
    jac(i, i) = c;
    jac(j, j) = c;
    jac(i, j) = -sn;
    jac(j, i) = sn;
    if (r > 0.0) {
      // rank-one correction from the radius dependence of the angle
      Eigen::VectorXd w = Eigen::VectorXd::Zero(dim());
      w(i) = -sn * y(i) - c * y(j);
      w(j) = c * y(i) - sn * y(j);
      jac += (profile_.dangle_dr(t_, r) / r) * (w * y.transpose());
    }
    return jac;
  }

  double log_abs_det_jacobian(const Eigen::VectorXd&) const override {
    return 0.0;
  }

  std::string name() const override { return "radius_rotation"; }

 private:
  Eigen::VectorXd rotate(const Eigen::VectorXd& s, double sign) const {
    if (s.size() != dim())
      throw argument_error("radius_rotation: point dimension mismatch");
    const int i = profile_.plane_i, j = profile_.plane_j;
    Eigen::VectorXd y = s - profile_.center;
    double r = y.norm();
    if (r >= profile_.cutoff) return s;
    double th = sign * profile_.angle(t_, r);
    double c = std::cos(th), sn = std::sin(th);
    double yi = y(i), yj = y(j);
    y(i) = c * yi - sn * yj;
    y(j) = sn * yi + c * yj;
    return profile_.center + y;
  }

  RadiusRotationProfile profile_;
  double t_;
};

}  // namespace

MapPtr RadiusRotationProfile::map_at(double t) const {
  return std::make_shared<RadiusRotationMap>(*this, t);
}

FieldPtr RadiusRotationProfile::generator() const {
  RadiusRotationProfile p = *this;
  auto field = std::make_shared<FunctionalField>(
      static_cast<int>(p.center.size()),
      [p](double, const Eigen::VectorXd& x) {
        Eigen::VectorXd y = x - p.center;
        double scale = p.amplitude * bump(y.norm() / p.cutoff);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
        v(p.plane_i) = -scale * y(p.plane_j);
        v(p.plane_j) = scale * y(p.plane_i);
        return v;
      },
      "radius_rotation_generator");
  field->set_support_public(Domain::ball(p.center, p.cutoff));
  return field;
}

// ---------------------------------------------------------------------------
// Divergence-free constructions

FieldPtr build_xij(DensityPtr density, int i, int j) {
  if (!density) throw argument_error("build_xij: null density");
  const int d = density->dim();
  if (!(0 <= i && i < j && j < d))
    throw argument_error("build_xij: requires 0 <= i < j < d");
  return std::make_shared<FunctionalField>(
      d,
      [density, i, j](double, const Eigen::VectorXd& x) {
        Eigen::VectorXd g = density->gradient(x);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
        v(i) = g(j);
        v(j) = -g(i);
        return v;
      },
      "xij_field");
}

RadialBump::RadialBump(Eigen::VectorXd center, double radius, double amplitude)
    : center_(std::move(center)), radius_(radius), amplitude_(amplitude) {
  if (center_.size() < 1) throw argument_error("RadialBump: empty center");
  if (!(radius_ > 0.0)) throw argument_error("RadialBump: radius must be positive");
}

double RadialBump::value(const Eigen::VectorXd& x) const {
  return amplitude_ * bump((x - center_).norm() / radius_);
}

Eigen::VectorXd RadialBump::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = x - center_;
  double r = y.norm();
  if (r >= radius_ || r < 1e-300) return Eigen::VectorXd::Zero(x.size());
  double db = amplitude_ * bump_derivative(r / radius_) / radius_;
  return (db / r) * y;
}

FieldPtr build_compact_divfree(const RadialBump& phi, int i, int j) {
  const int d = phi.dim();
  if (!(0 <= i && i < j && j < d))
    throw argument_error("build_compact_divfree: requires 0 <= i < j < d");
  auto field = std::make_shared<FunctionalField>(
      d,
      [phi, i, j](double, const Eigen::VectorXd& x) {
        Eigen::VectorXd g = phi.gradient(x);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
        v(i) = g(j);
        v(j) = -g(i);
        return v;
      },
      "compact_divfree_field");
  field->set_support_public(phi.support());
  return field;
}

// ---------------------------------------------------------------------------
// Flow maps

namespace {

class FlowMap final : public SmoothMap {
 public:
  FlowMap(FieldPtr field, double t, int steps)
      : field_(std::move(field)), t_(t), steps_(steps) {
    set_domain(Domain::all(field_->dim()));
  }

  int dim() const override { return field_->dim(); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override {
    return rk4_flow(*field_, x, 0.0, t_, steps_);
  }

  bool has_inverse() const override { return true; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override {
    return rk4_flow(*field_, y, t_, 0.0, steps_);
  }

  /// Integrates the variational equation  J' = DX(x(t)) J  alongside the
  /// state.  Differencing the field (smooth, closed form) is far more
  /// accurate than differencing the composed flow, whose higher derivatives
  /// grow with integration time.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override {
    const int d = dim();
    const double h = t_ / steps_;
    Eigen::VectorXd p = x;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(d, d);
    double t = 0.0;
    for (int s = 0; s < steps_; ++s) {
      const Eigen::VectorXd k1 = field_->evaluate(t, p);
      const Eigen::MatrixXd m1 = field_->jacobian(t, p) * jac;
      const Eigen::VectorXd p2 = p + 0.5 * h * k1;
      const Eigen::VectorXd k2 = field_->evaluate(t + 0.5 * h, p2);
      const Eigen::MatrixXd m2 =
          field_->jacobian(t + 0.5 * h, p2) * (jac + 0.5 * h * m1);
      const Eigen::VectorXd p3 = p + 0.5 * h * k2;
      const Eigen::VectorXd k3 = field_->evaluate(t + 0.5 * h, p3);
      const Eigen::MatrixXd m3 =
          field_->jacobian(t + 0.5 * h, p3) * (jac + 0.5 * h * m2);
      const Eigen::VectorXd p4 = p + h * k3;
      const Eigen::VectorXd k4 = field_->evaluate(t + h, p4);
      const Eigen::MatrixXd m4 = field_->jacobian(t + h, p4) * (jac + h * m3);
      p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      jac += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
      t += h;
      if (!p.allFinite() || !jac.allFinite())
        throw integration_error("flow jacobian diverged", t);
    }
    return jac;
  }

  std::string name() const override { return "flow[" + field_->name() + "]"; }

 private:
  FieldPtr field_;
  double t_;
  int steps_;
};

}  // namespace

MapPtr flow_map(FieldPtr field, double t, int steps) {
  if (!field) throw argument_error("flow_map: null field");
  if (steps == 0) steps = rk4_default_steps(0.0, t);
  if (steps < 1) throw argument_error("flow_map: steps must be >= 1");
  return std::make_shared<FlowMap>(std::move(field), t, steps);
}

// ---------------------------------------------------------------------------
// Measure preservation

MptReport verify_mpt(const SmoothMap& map, const Density& density,
                     const Eigen::MatrixXd& points, double tol) {
  if (points.rows() == 0) throw argument_error("verify_mpt: empty point set");
  if (points.cols() != map.dim() || density.dim() != map.dim())
    throw argument_error("verify_mpt: dimension mismatch");
  if (!map.has_inverse())
    throw capability_error("verify_mpt: map has no inverse");
  if (!(tol > 0)) throw argument_error("verify_mpt: tolerance must be positive");

  MptReport report;
  report.tol = tol;
  report.n_points = static_cast<int>(points.rows());
  report.residuals.assign(points.rows(), 0.0);

  constexpr double kFloor = 1e-12;
  parallel_for(static_cast<int>(points.rows()), [&](int idx) {
    Eigen::VectorXd x = points.row(idx).transpose();
    Eigen::VectorXd s = map.inverse(x);
    double push = density.value(s) * std::exp(-map.log_abs_det_jacobian(s));
    double target = density.value(x);
    report.residuals[idx] = std::abs(push - target) / std::max(target, kFloor);
  });

  int worst = 0;
  for (int i = 1; i < report.n_points; ++i)
    if (report.residuals[i] > report.residuals[worst]) worst = i;
  report.max_relative_residual = report.residuals[worst];
  report.worst_point = points.row(worst).transpose();
  report.pass = report.max_relative_residual <= tol;
  return report;
}

// ---------------------------------------------------------------------------
// Polar reparameterization construction

AngularTransform make_angular_transform(int k, bool tabulated) {
  if (k < 0 || k > 14)
    throw argument_error("make_angular_transform: power out of range");
  auto sink = [k](double th) { return std::pow(std::sin(th), k); };

  AngularTransform at;
  if (tabulated) {
    const int n = 2048;
    std::vector<double> xs(n), cum(n);
    double acc = 0.0;
    xs[0] = 0.0;
    cum[0] = 0.0;
    for (int i = 1; i < n; ++i) {
      xs[i] = M_PI * static_cast<double>(i) / (n - 1);
      acc += quad_adaptive(sink, xs[i - 1], xs[i], 1e-14);
      cum[i] = acc;
    }
    auto table = std::make_shared<MonotoneTable>(
        MonotoneTable::from_values(std::move(xs), std::move(cum)));
    at.g_total = table->y_hi();
    double g_total = at.g_total;
    at.forward = [table, g_total](double u) {
      return table->inverse(g_total * u);
    };
    at.inverse = [table, g_total](double th) {
      return table->value(th) / g_total;
    };
  } else {
    double g_total = quad_adaptive(sink, 0.0, M_PI, 1e-13);
    at.g_total = g_total;
    auto g = [sink](double th) {
      if (th <= 0.0) return 0.0;
      return quad_adaptive(sink, 0.0, th, 1e-13);
    };
    at.forward = [g, sink, g_total](double u) {
      return inverse_monotone(g, g_total * u, 0.0, M_PI, 1e-13, sink);
    };
    at.inverse = [g, g_total](double th) { return g(th) / g_total; };
  }
  double g_total = at.g_total;
  auto fwd = at.forward;
  at.derivative = [fwd, g_total, k](double u) {
    double th = fwd(u);
    return g_total / std::pow(std::sin(th), k);
  };
  return at;
}

MapPtr build_polar_reparam(const RadialDensity& radial,
                           const PolarReparamOptions& opts) {
  const int d = radial.dim();
  if (d < 2) throw argument_error("build_polar_reparam: needs dimension >= 2");

  auto rad = std::make_shared<RadialDensity>(radial);
  const bool tab = opts.tabulated;

  std::vector<CoordwiseReparam::Monotone1d> comps(d);
  comps[0].f = [rad, tab](double u) { return rad->radial_quantile(u, tab); };
  comps[0].df = [rad, tab](double u) {
    double r = rad->radial_quantile(u, tab);
    double q = rad->radial_value(r);
    if (!(q > 0.0))
      throw singularity_error("build_polar_reparam: flat radial law at quantile");
    return 1.0 / q;
  };
  comps[0].finv = [rad, tab](double r) { return rad->radial_cdf(r, tab); };
  comps[0].lo = 0.0;
  comps[0].hi = 1.0;

  comps[1].f = [](double u) { return 2.0 * M_PI * u; };
  comps[1].df = [](double) { return 2.0 * M_PI; };
  comps[1].finv = [](double phi) { return phi / (2.0 * M_PI); };
  comps[1].lo = 0.0;
  comps[1].hi = 1.0;

  for (int k = 1; k <= d - 2; ++k) {
    AngularTransform at = make_angular_transform(k, tab);
    comps[k + 1].f = at.forward;
    comps[k + 1].df = at.derivative;
    comps[k + 1].finv = at.inverse;
    comps[k + 1].lo = 0.0;
    comps[k + 1].hi = 1.0;
  }

  auto inner = std::make_shared<CoordwiseReparam>(std::move(comps));
  auto outer = std::make_shared<PolarMap>(d, 0.0, radial.table_end() * 1.0000001,
                                          opts.angular_margin);
  return compose(outer, inner);
}

MapPtr rotate_member(MapPtr f, const Eigen::MatrixXd& rotation) {
  if (!f) throw argument_error("rotate_member: null map");
  require_orthogonal(rotation, 1e-10, "rotate_member");
  if (rotation.rows() != f->dim())
    throw argument_error("rotate_member: dimension mismatch");
  return compose(std::make_shared<LinearMap>(rotation), f);
}

}  // namespace ica_lab
