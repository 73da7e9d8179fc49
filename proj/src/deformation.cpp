#include "ica_lab/deformation.hpp"

#include <cmath>

#include "ica_lab/numerics.hpp"
#include "ica_lab/rng.hpp"

namespace ica_lab {

FieldPtr extract_generator(const Deformation& def, double t, double dt) {
  if (!def.f0 || !def.deformed)
    throw argument_error("extract_generator: incomplete deformation");
  if (!(dt > 0)) throw argument_error("extract_generator: dt must be positive");

  MapPtr phi_t = def.deformed(t);
  MapPtr f_t = def.reference_at(t);
  MapPtr phi_p = def.deformed(t + dt);
  MapPtr phi_m = def.deformed(t - dt);
  MapPtr f_p = def.reference_at(t + dt);
  MapPtr f_m = def.reference_at(t - dt);
  if (!phi_t || !phi_p || !phi_m || !f_t || !f_p || !f_m)
    throw argument_error("extract_generator: family returned a null map");
  if (!phi_t->has_inverse())
    throw capability_error("extract_generator: deformed family lacks an inverse");
  if (!f_p->has_inverse() || !f_m->has_inverse())
    throw capability_error("extract_generator: reference family lacks an inverse");

  const int d = def.f0->dim();
  auto eval = [=](double, const Eigen::VectorXd& x) {
    Eigen::VectorXd s = phi_t->inverse(f_t->evaluate(x));
    Eigen::VectorXd fwd = f_p->inverse(phi_p->evaluate(s));
    Eigen::VectorXd bwd = f_m->inverse(phi_m->evaluate(s));
    return ((fwd - bwd) / (2.0 * dt)).eval();
  };
  return std::make_shared<FunctionalField>(d, eval, "extracted_generator");
}

// ---------------------------------------------------------------------------
// First-order compatibility system

ConstraintReport oct_constraint_residual(const SmoothMap& f0, const VectorField& X,
                                         const Eigen::MatrixXd& points,
                                         const OctConstraintOptions& opts) {
  const int d = f0.dim();
  if (points.rows() == 0)
    throw argument_error("oct_constraint_residual: empty point set");
  if (points.cols() != d || X.dim() != d)
    throw argument_error("oct_constraint_residual: dimension mismatch");

  const int n = static_cast<int>(points.rows());
  std::vector<Eigen::VectorXd> lambdas(n);
  std::vector<Eigen::MatrixXd> partials(n);  // (i,j) = d_j X_i
  std::vector<Eigen::VectorXd> values(n);

  parallel_for(n, [&](int idx) {
    Eigen::VectorXd x = points.row(idx).transpose();
    Eigen::MatrixXd jac = f0.jacobian(x);
    Eigen::MatrixXd gram = jac.transpose() * jac;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        double scale = std::sqrt(std::max(gram(i, i) * gram(j, j), 1e-300));
        if (std::abs(gram(i, j)) / scale > opts.precheck_tol)
          throw precondition_error(
              "oct_constraint_residual: base map lacks orthogonal Jacobian "
              "columns at a probe point");
      }
    lambdas[idx] = gram.diagonal();
    partials[idx] = fd_jacobian_of(
        [&](const Eigen::VectorXd& p) { return X.evaluate(opts.t, p); }, x,
        opts.fd_step);
    values[idx] = X.evaluate(opts.t, x);
  });

  double sup = 0.0;
  for (const auto& v : values) sup = std::max(sup, v.cwiseAbs().maxCoeff());

  ConstraintReport report;
  report.d = d;
  report.options = opts;
  report.field_sup_norm = sup;
  report.pair_residual = Eigen::MatrixXd::Zero(d, d);
  const double denom_field = sup + 1e-12;

  for (int idx = 0; idx < n; ++idx) {
    const Eigen::VectorXd& lam = lambdas[idx];
    const Eigen::MatrixXd& dx = partials[idx];
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        double raw = lam(i) * dx(i, j) + lam(j) * dx(j, i);
        double res = std::abs(raw) /
                     (std::sqrt(lam(i) * lam(j)) * denom_field);
        if (res > report.pair_residual(i, j)) {
          report.pair_residual(i, j) = res;
          report.pair_residual(j, i) = res;
        }
      }
    }
    double div = dx.trace();
    report.divergence_max =
        std::max(report.divergence_max, std::abs(div) / denom_field);
  }
  report.first_order_max = report.pair_residual.maxCoeff();
  report.first_order_pass = report.first_order_max <= opts.first_order_tol;
  report.divergence_pass = report.divergence_max <= opts.divergence_tol;
  return report;
}

// ---------------------------------------------------------------------------
// Second-order (wave-type) residual

double wave_residual(const SmoothMap& f0, const VectorField& X, int coord,
                     const Eigen::MatrixXd& points, double h) {
  const int d = f0.dim();
  if (points.rows() == 0) throw argument_error("wave_residual: empty point set");
  if (points.cols() != d || X.dim() != d)
    throw argument_error("wave_residual: dimension mismatch");
  if (coord < 0 || coord >= d)
    throw argument_error("wave_residual: coordinate out of range");
  if (!(h > 0)) throw argument_error("wave_residual: step must be positive");

  auto xi = [&](const Eigen::VectorXd& p) { return X.evaluate(0.0, p)(coord); };
  auto lambda_at = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd jac = f0.jacobian(p);
    return (jac.transpose() * jac).diagonal().eval();
  };

  const int n = static_cast<int>(points.rows());
  std::vector<double> residuals(n, 0.0);
  parallel_for(n, [&](int idx) {
    Eigen::VectorXd x = points.row(idx).transpose();
    Eigen::VectorXd xp = x, xm = x;

    xp(coord) = x(coord) + h;
    xm(coord) = x(coord) - h;
    double own = (xi(xp) - 2.0 * xi(x) + xi(xm)) / (h * h);
    xp(coord) = x(coord);
    xm(coord) = x(coord);

    double cross = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == coord) continue;
      // flux a_j * d_j X_i evaluated half-staggered around x
      auto flux = [&](Eigen::VectorXd p) {
        Eigen::VectorXd lam = lambda_at(p);
        Eigen::VectorXd pp = p, pm = p;
        pp(j) += h;
        pm(j) -= h;
        double dji = (xi(pp) - xi(pm)) / (2.0 * h);
        return (lam(coord) / lam(j)) * dji;
      };
      xp(j) = x(j) + h;
      xm(j) = x(j) - h;
      cross += (flux(xp) - flux(xm)) / (2.0 * h);
      xp(j) = x(j);
      xm(j) = x(j);
    }
    residuals[idx] = std::abs(own - cross);
  });
  double worst = 0.0;
  for (double r : residuals) worst = std::max(worst, r);
  return worst;
}

// ---------------------------------------------------------------------------
// Boundary behaviour and resonances

double boundary_vanishing(const VectorField& X, double eps, int n_samples,
                          std::uint64_t seed) {
  const int d = X.dim();
  if (!(eps > 0.0 && eps < 0.5))
    throw argument_error("boundary_vanishing: eps must lie in (0, 0.5)");
  if (n_samples < 1) throw argument_error("boundary_vanishing: need samples");

  RngStream rng = RngStream::substream(seed, "boundary_shell");
  double worst = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    Eigen::VectorXd s(d);
    for (int i = 0; i < d; ++i) s(i) = rng.uniform(0.0, 1.0);
    int face = static_cast<int>(rng.uniform_int(2 * d));
    int axis = face / 2;
    double depth = eps * rng.uniform();
    s(axis) = (face % 2 == 0) ? depth : 1.0 - depth;
    worst = std::max(worst, X.evaluate(0.0, s).norm());
  }
  return worst;
}

ResonanceResult resonance_alpha(const Eigen::VectorXd& mu,
                                const Eigen::VectorXi& m, int i) {
  const int d = static_cast<int>(mu.size());
  if (d < 2 || m.size() != d)
    throw argument_error("resonance_alpha: size mismatch");
  if (i < 0 || i >= d) throw argument_error("resonance_alpha: index out of range");
  for (int j = 0; j < d; ++j) {
    if (!(mu(j) > 0)) throw argument_error("resonance_alpha: mu must be positive");
    if (m(j) < 0) throw argument_error("resonance_alpha: counts must be >= 0");
  }
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    if (j == i) continue;
    double ratio = mu(i) / mu(j);
    acc += static_cast<double>(m(j)) * static_cast<double>(m(j)) * ratio * ratio;
  }
  ResonanceResult out;
  out.alpha = std::sqrt(acc);
  out.resonant = std::abs(out.alpha - std::round(out.alpha)) < 1e-9;
  return out;
}

}  // namespace ica_lab
