#include "ica_lab/maps.hpp"

#include <cmath>

#include "ica_lab/numerics.hpp"
#include "ica_lab/rng.hpp"

namespace ica_lab {

void require_orthogonal(const Eigen::MatrixXd& q, double tol,
                        const std::string& who) {
  if (q.rows() != q.cols()) throw argument_error(who + ": matrix not square");
  Eigen::MatrixXd gram = q.transpose() * q;
  gram.diagonal().array() -= 1.0;
  if (gram.cwiseAbs().maxCoeff() > tol)
    throw argument_error(who + ": matrix is not orthogonal");
}

// ---------------------------------------------------------------------------
// LinearMap

LinearMap::LinearMap(Eigen::MatrixXd a, Eigen::VectorXd b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size())
    throw argument_error("LinearMap: shape mismatch");
  set_domain(Domain::all(dim()));
  lu_.compute(a_);
  double det = lu_.determinant();
  invertible_ = std::isfinite(det) && std::abs(det) > 1e-300;
  log_abs_det_ = invertible_ ? log_abs_det(a_)
                             : -std::numeric_limits<double>::infinity();
}

LinearMap::LinearMap(Eigen::MatrixXd a)
    : LinearMap(a, Eigen::VectorXd::Zero(a.rows())) {}

std::shared_ptr<LinearMap> LinearMap::rotation(int d, int i, int j,
                                               double angle) {
  if (i < 0 || j < 0 || i >= d || j >= d || i == j)
    throw argument_error("LinearMap::rotation: bad plane indices");
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
  double c = std::cos(angle), s = std::sin(angle);
  r(i, i) = c;
  r(j, j) = c;
  r(i, j) = -s;
  r(j, i) = s;
  return std::make_shared<LinearMap>(r);
}

Eigen::MatrixXd LinearMap::random_orthogonal(int d, std::uint64_t seed) {
  RngStream rng = RngStream::substream(seed, "orthogonal");
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

Eigen::VectorXd LinearMap::inverse(const Eigen::VectorXd& y) const {
  if (!invertible_) throw capability_error("LinearMap: singular matrix");
  return lu_.solve(y - b_);
}

double LinearMap::log_abs_det_jacobian(const Eigen::VectorXd&) const {
  if (!invertible_) throw singularity_error("LinearMap: singular matrix");
  return log_abs_det_;
}

// ---------------------------------------------------------------------------
// MoebiusMap

MoebiusMap::MoebiusMap(Eigen::VectorXd a, Eigen::VectorXd b, double alpha,
                       Eigen::MatrixXd rotation, int eps, double r_min)
    : a_(std::move(a)), b_(std::move(b)), alpha_(alpha),
      rot_(std::move(rotation)), eps_(eps), r_min_(r_min) {
  const int d = static_cast<int>(a_.size());
  if (d < 1 || b_.size() != d || rot_.rows() != d || rot_.cols() != d)
    throw argument_error("MoebiusMap: shape mismatch");
  if (eps_ != 0 && eps_ != 2)
    throw argument_error("MoebiusMap: eps must be 0 or 2");
  if (alpha_ == 0.0 || !std::isfinite(alpha_))
    throw argument_error("MoebiusMap: alpha must be nonzero and finite");
  if (r_min_ <= 0.0) throw argument_error("MoebiusMap: r_min must be positive");
  require_orthogonal(rot_, 1e-10, "MoebiusMap");
  set_domain(eps_ == 2 ? Domain::punctured(a_, r_min_) : Domain::all(d));
}

std::shared_ptr<MoebiusMap> MoebiusMap::inversion(int d) {
  return std::make_shared<MoebiusMap>(Eigen::VectorXd::Zero(d),
                                      Eigen::VectorXd::Zero(d), 1.0,
                                      Eigen::MatrixXd::Identity(d, d), 2);
}

Eigen::VectorXd MoebiusMap::offset(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw argument_error("MoebiusMap: point dimension mismatch");
  Eigen::VectorXd y = x - a_;
  if (eps_ == 2 && y.norm() < r_min_)
    throw singularity_error("MoebiusMap: evaluation too close to the center");
  return y;
}

Eigen::VectorXd MoebiusMap::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = offset(x);
  if (eps_ == 0) return b_ + alpha_ * (rot_ * y);
  return b_ + (alpha_ / y.squaredNorm()) * (rot_ * y);
}

Eigen::MatrixXd MoebiusMap::jacobian(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = offset(x);
  if (eps_ == 0) return alpha_ * rot_;
  double r2 = y.squaredNorm();
  Eigen::VectorXd ry = rot_ * y;
  return (alpha_ / r2) * rot_ - (2.0 * alpha_ / (r2 * r2)) * (ry * y.transpose());
}

Eigen::VectorXd MoebiusMap::inverse(const Eigen::VectorXd& y) const {
  if (y.size() != dim()) throw argument_error("MoebiusMap: point dimension mismatch");
  Eigen::VectorXd u = y - b_;
  if (eps_ == 0) return a_ + (rot_.transpose() * u) / alpha_;
  double n = u.norm();
  if (n < 1e-300)
    throw singularity_error("MoebiusMap: inverse target at the image of infinity");
  if (std::abs(alpha_) / n < r_min_)
    throw domain_error("MoebiusMap: inverse preimage inside the excluded ball");
  return a_ + (alpha_ / (n * n)) * (rot_.transpose() * u);
}

double MoebiusMap::log_abs_det_jacobian(const Eigen::VectorXd& x) const {
  const int d = dim();
  if (eps_ == 0) return d * std::log(std::abs(alpha_));
  Eigen::VectorXd y = offset(x);
  return d * std::log(std::abs(alpha_)) - 2.0 * d * std::log(y.norm());
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moebius_eval_and_jacobian(
    const MoebiusMap& map, const Eigen::VectorXd& x) {
  return {map.evaluate(x), map.jacobian(x)};
}

// ---------------------------------------------------------------------------
// PolarMap

PolarMap::PolarMap(int d, double r_lo, double r_hi, double angular_margin)
    : d_(d), r_lo_(r_lo), r_hi_(r_hi), margin_(angular_margin) {
  if (d_ < 2 || d_ > 16) throw argument_error("PolarMap: dimension out of range");
  if (!(0.0 <= r_lo_ && r_lo_ < r_hi_))
    throw argument_error("PolarMap: requires 0 <= r_lo < r_hi");
  if (margin_ < 0.0 || margin_ >= M_PI / 2)
    throw argument_error("PolarMap: bad angular margin");
  Eigen::VectorXd lo(d_), hi(d_);
  lo(0) = r_lo_;
  hi(0) = r_hi_;
  lo(1) = 0.0;
  hi(1) = 2.0 * M_PI;
  for (int k = 2; k < d_; ++k) {
    lo(k) = margin_;
    hi(k) = M_PI - margin_;
  }
  set_domain(Domain::box(lo, hi));
}

void PolarMap::check(const Eigen::VectorXd& c) const {
  if (c.size() != d_) throw argument_error("PolarMap: point dimension mismatch");
  if (!domain().contains(c))
    throw domain_error("PolarMap: coordinates outside the chart");
}

Eigen::VectorXd PolarMap::evaluate(const Eigen::VectorXd& c) const {
  check(c);
  double r = c(0), phi = c(1);
  Eigen::VectorXd v(2);
  v << r * std::sin(phi), r * std::cos(phi);
  for (int k = 1; k <= d_ - 2; ++k) {
    double th = c(k + 1);
    Eigen::VectorXd nv(v.size() + 1);
    nv.head(v.size()) = v * std::sin(th);
    nv(v.size()) = r * std::cos(th);
    v = nv;
  }
  return v;
}

Eigen::MatrixXd PolarMap::jacobian(const Eigen::VectorXd& c) const {
  check(c);
  double r = c(0), phi = c(1);
  Eigen::VectorXd v(2);
  v << r * std::sin(phi), r * std::cos(phi);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, d_);
  jac(0, 0) = std::sin(phi);
  jac(1, 0) = std::cos(phi);
  jac(0, 1) = r * std::cos(phi);
  jac(1, 1) = -r * std::sin(phi);
  for (int k = 1; k <= d_ - 2; ++k) {
    double th = c(k + 1);
    double s = std::sin(th), co = std::cos(th);
    const int m = static_cast<int>(v.size());
    Eigen::MatrixXd njac = Eigen::MatrixXd::Zero(m + 1, d_);
    njac.topRows(m) = s * jac;
    njac.block(0, k + 1, m, 1) += co * v;
    njac(m, 0) = co;
    njac(m, k + 1) = -r * s;
    Eigen::VectorXd nv(m + 1);
    nv.head(m) = v * s;
    nv(m) = r * co;
    v = nv;
    jac = njac;
  }
  return jac;
}

Eigen::VectorXd PolarMap::inverse(const Eigen::VectorXd& x) const {
  if (x.size() != d_) throw argument_error("PolarMap: point dimension mismatch");
  Eigen::VectorXd c(d_);
  double r = x.norm();
  c(0) = r;
  Eigen::VectorXd v = x;
  for (int k = d_ - 2; k >= 1; --k) {
    const int m = static_cast<int>(v.size());
    double th = std::acos(std::clamp(v(m - 1) / r, -1.0, 1.0));
    c(k + 1) = th;
    double s = std::sin(th);
    if (s <= 0.0)
      throw domain_error("PolarMap: inverse hit a degenerate axis");
    v = (v.head(m - 1) / s).eval();
  }
  double phi = std::atan2(v(0), v(1));
  if (phi <= 0.0) phi += 2.0 * M_PI;
  c(1) = phi;
  if (!domain().contains(c))
    throw domain_error("PolarMap: inverse image outside the chart");
  return c;
}

double PolarMap::det_analytic(const Eigen::VectorXd& c) const {
  check(c);
  double r = c(0);
  double det = (d_ % 2 == 0) ? -1.0 : 1.0;
  det *= std::pow(r, d_ - 1);
  for (int k = 1; k <= d_ - 2; ++k)
    det *= std::pow(std::sin(c(k + 1)), k);
  return det;
}

double PolarMap::log_abs_det_jacobian(const Eigen::VectorXd& c) const {
  check(c);
  double acc = (d_ - 1) * std::log(c(0));
  for (int k = 1; k <= d_ - 2; ++k)
    acc += k * std::log(std::sin(c(k + 1)));
  return acc;
}

// ---------------------------------------------------------------------------
// CoordwiseReparam

CoordwiseReparam::CoordwiseReparam(std::vector<Monotone1d> comps)
    : CoordwiseReparam(std::move(comps), {}, {}) {}

CoordwiseReparam::CoordwiseReparam(std::vector<Monotone1d> comps,
                                   std::vector<int> perm, std::vector<int> signs)
    : comps_(std::move(comps)), perm_(std::move(perm)), signs_(std::move(signs)) {
  const int d = static_cast<int>(comps_.size());
  if (d < 1) throw argument_error("CoordwiseReparam: empty component list");
  if (perm_.empty()) {
    perm_.resize(d);
    for (int i = 0; i < d; ++i) perm_[i] = i;
  }
  if (signs_.empty()) signs_.assign(d, 1);
  if (static_cast<int>(perm_.size()) != d || static_cast<int>(signs_.size()) != d)
    throw argument_error("CoordwiseReparam: permutation size mismatch");
  std::vector<bool> seen(d, false);
  for (int i = 0; i < d; ++i) {
    if (perm_[i] < 0 || perm_[i] >= d || seen[perm_[i]])
      throw argument_error("CoordwiseReparam: invalid permutation");
    seen[perm_[i]] = true;
    if (signs_[i] != 1 && signs_[i] != -1)
      throw argument_error("CoordwiseReparam: signs must be +-1");
    if (!comps_[i].f || !comps_[i].df)
      throw argument_error("CoordwiseReparam: missing function or derivative");
  }
  Eigen::VectorXd lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    lo(i) = comps_[i].lo;
    hi(i) = comps_[i].hi;
  }
  set_domain(Domain::box(lo, hi));
}

void CoordwiseReparam::check(const Eigen::VectorXd& x) const {
  if (x.size() != dim())
    throw argument_error("CoordwiseReparam: point dimension mismatch");
  if (!domain().contains(x))
    throw domain_error("CoordwiseReparam: point outside component intervals");
}

Eigen::VectorXd CoordwiseReparam::evaluate(const Eigen::VectorXd& x) const {
  check(x);
  Eigen::VectorXd y(dim());
  for (int i = 0; i < dim(); ++i) {
    int k = perm_[i];
    y(i) = signs_[i] * comps_[k].f(x(k));
  }
  return y;
}

Eigen::MatrixXd CoordwiseReparam::jacobian(const Eigen::VectorXd& x) const {
  check(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) {
    int k = perm_[i];
    jac(i, k) = signs_[i] * comps_[k].df(x(k));
  }
  return jac;
}

bool CoordwiseReparam::has_inverse() const {
  for (const auto& c : comps_)
    if (!c.finv) return false;
  return true;
}

Eigen::VectorXd CoordwiseReparam::inverse(const Eigen::VectorXd& y) const {
  if (y.size() != dim())
    throw argument_error("CoordwiseReparam: point dimension mismatch");
  if (!has_inverse())
    throw capability_error("CoordwiseReparam: a component lacks an inverse");
  Eigen::VectorXd x(dim());
  for (int i = 0; i < dim(); ++i) {
    int k = perm_[i];
    x(k) = comps_[k].finv(signs_[i] * y(i));
  }
  return x;
}

double CoordwiseReparam::log_abs_det_jacobian(const Eigen::VectorXd& x) const {
  check(x);
  double acc = 0.0;
  for (int k = 0; k < dim(); ++k) {
    double d = comps_[k].df(x(k));
    if (!(std::abs(d) > 0.0))
      throw singularity_error("CoordwiseReparam: vanishing derivative");
    acc += std::log(std::abs(d));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// ConcatConformal2D

ConcatConformal2D::ConcatConformal2D(std::vector<MapPtr> blocks)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw argument_error("ConcatConformal2D: no blocks");
  for (const auto& b : blocks_) {
    if (!b) throw argument_error("ConcatConformal2D: null block");
    if (b->dim() != 2)
      throw argument_error("ConcatConformal2D: each block must be planar");
  }
  set_domain(Domain::all(dim()));
}

Eigen::VectorXd ConcatConformal2D::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != dim())
    throw argument_error("ConcatConformal2D: point dimension mismatch");
  Eigen::VectorXd y(dim());
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    y.segment<2>(2 * b) = blocks_[b]->evaluate(x.segment<2>(2 * b));
  return y;
}

Eigen::MatrixXd ConcatConformal2D::jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != dim())
    throw argument_error("ConcatConformal2D: point dimension mismatch");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim(), dim());
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    jac.block<2, 2>(2 * b, 2 * b) = blocks_[b]->jacobian(x.segment<2>(2 * b));
  return jac;
}

bool ConcatConformal2D::has_inverse() const {
  for (const auto& b : blocks_)
    if (!b->has_inverse()) return false;
  return true;
}

Eigen::VectorXd ConcatConformal2D::inverse(const Eigen::VectorXd& y) const {
  if (y.size() != dim())
    throw argument_error("ConcatConformal2D: point dimension mismatch");
  Eigen::VectorXd x(dim());
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    x.segment<2>(2 * b) = blocks_[b]->inverse(y.segment<2>(2 * b));
  return x;
}

double ConcatConformal2D::log_abs_det_jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != dim())
    throw argument_error("ConcatConformal2D: point dimension mismatch");
  double acc = 0.0;
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    acc += blocks_[b]->log_abs_det_jacobian(x.segment<2>(2 * b));
  return acc;
}

}  // namespace ica_lab
