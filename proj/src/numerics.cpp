#include "ica_lab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

namespace ica_lab {

const ToleranceProfile& default_tolerances() {
  static const ToleranceProfile profile{};
  return profile;
}

// ---------------------------------------------------------------------------
// SmoothMap / VectorField fallbacks

Eigen::MatrixXd SmoothMap::jacobian(const Eigen::VectorXd& x) const {
  return fd_jacobian(*this, x);
}

double SmoothMap::log_abs_det_jacobian(const Eigen::VectorXd& x) const {
  double v = log_abs_det(jacobian(x));
  if (!std::isfinite(v))
    throw singularity_error(name() + ": singular Jacobian in log|det|");
  return v;
}

Eigen::MatrixXd VectorField::jacobian(double t, const Eigen::VectorXd& x) const {
  double h = default_tolerances().fd_step;
  return fd_jacobian_of([&](const Eigen::VectorXd& p) { return evaluate(t, p); },
                        x, h);
}

// ---------------------------------------------------------------------------
// ComposedMap

ComposedMap::ComposedMap(MapPtr outer, MapPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  if (!outer_ || !inner_) throw argument_error("compose: null map");
  if (outer_->dim() != inner_->dim())
    throw argument_error("compose: dimension mismatch");
}

Eigen::VectorXd ComposedMap::evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd mid = inner_->evaluate(x);
  if (!outer_->domain().contains(mid))
    throw domain_error(name() + ": intermediate point left the outer domain");
  return outer_->evaluate(mid);
}

Eigen::MatrixXd ComposedMap::jacobian(const Eigen::VectorXd& x) const {
  Eigen::VectorXd mid = inner_->evaluate(x);
  if (!outer_->domain().contains(mid))
    throw domain_error(name() + ": intermediate point left the outer domain");
  return outer_->jacobian(mid) * inner_->jacobian(x);
}

Eigen::VectorXd ComposedMap::inverse(const Eigen::VectorXd& y) const {
  return inner_->inverse(outer_->inverse(y));
}

double ComposedMap::log_abs_det_jacobian(const Eigen::VectorXd& x) const {
  Eigen::VectorXd mid = inner_->evaluate(x);
  if (!outer_->domain().contains(mid))
    throw domain_error(name() + ": intermediate point left the outer domain");
  return outer_->log_abs_det_jacobian(mid) + inner_->log_abs_det_jacobian(x);
}

MapPtr compose(MapPtr outer, MapPtr inner) {
  return std::make_shared<ComposedMap>(std::move(outer), std::move(inner));
}

// ---------------------------------------------------------------------------
// Finite differences

Eigen::MatrixXd fd_jacobian(const SmoothMap& map, const Eigen::VectorXd& x,
                            double h) {
  if (x.size() != map.dim())
    throw argument_error("fd_jacobian: point dimension mismatch");
  if (!map.domain().contains(x, h))
    throw domain_error("fd_jacobian: probe stencil leaves the map domain");
  return fd_jacobian_of([&](const Eigen::VectorXd& p) { return map.evaluate(p); },
                        x, h);
}

double fd_divergence(const VectorField& field, double t, const Eigen::VectorXd& x,
                     double h) {
  if (h <= 0) throw argument_error("fd_divergence: step must be positive");
  double div = 0.0;
  Eigen::VectorXd xp = x, xm = x;
  for (int i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    div += (field.evaluate(t, xp)(i) - field.evaluate(t, xm)(i)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return div;
}

// ---------------------------------------------------------------------------
// ODE flow

int rk4_default_steps(double t0, double t1) {
  double span = std::abs(t1 - t0);
  int steps = static_cast<int>(std::ceil(span * 1000.0));
  return std::max(steps, 16);
}

Eigen::VectorXd rk4_flow(const VectorField& field, const Eigen::VectorXd& x0,
                         double t0, double t1, int steps) {
  if (steps < 1) throw argument_error("rk4_flow: steps must be >= 1");
  if (x0.size() != field.dim())
    throw argument_error("rk4_flow: state dimension mismatch");
  double h = (t1 - t0) / steps;
  Eigen::VectorXd x = x0;
  double t = t0;
  Eigen::VectorXd k1, k2, k3, k4;
  for (int i = 0; i < steps; ++i) {
    k1 = field.evaluate(t, x);
    k2 = field.evaluate(t + 0.5 * h, x + 0.5 * h * k1);
    k3 = field.evaluate(t + 0.5 * h, x + 0.5 * h * k2);
    k4 = field.evaluate(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t0 + (i + 1) * h;
    if (!x.allFinite())
      throw integration_error("rk4_flow: non-finite state", t);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

struct SimpsonCtx {
  const std::function<double(double)>* f;
  int max_depth;
};

double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_rec(const SimpsonCtx& ctx, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = (*ctx.f)(lm), frm = (*ctx.f)(rm);
  double left = simpson(fa, flm, fm, a, m);
  double right = simpson(fm, frm, fb, m, b);
  double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  if (depth >= ctx.max_depth)
    throw precision_error("quad_adaptive: tolerance unreachable (depth limit)");
  return simpson_rec(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_rec(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

}  // namespace

double quad_adaptive(const std::function<double(double)>& f, double a, double b,
                     double tol) {
  if (!(a < b)) throw argument_error("quad_adaptive: requires a < b");
  if (tol <= 0) throw argument_error("quad_adaptive: tolerance must be positive");
  SimpsonCtx ctx{&f, 52};
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = simpson(fa, fm, fb, a, b);
  return simpson_rec(ctx, a, b, fa, fm, fb, whole, tol, 0);
}

// ---------------------------------------------------------------------------
// Monotone inversion

double inverse_monotone(const std::function<double(double)>& f, double y,
                        double lo, double hi, double tol,
                        const std::function<double(double)>& df) {
  if (!(lo < hi)) throw argument_error("inverse_monotone: requires lo < hi");
  double flo = f(lo), fhi = f(hi);
  if (!(flo <= fhi))
    throw argument_error("inverse_monotone: f not increasing on the bracket");
  double span = std::max(1.0, std::abs(fhi - flo));
  if (y < flo - 1e-9 * span || y > fhi + 1e-9 * span)
    throw range_error("inverse_monotone: target outside the bracket image");
  y = std::clamp(y, flo, fhi);
  double a = lo, b = hi;
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    double fx = f(x);
    if (fx > y)
      b = x;
    else
      a = x;
    double step_x = x;
    bool newton_ok = false;
    if (df) {
      double d = df(x);
      if (d > 0) {
        step_x = x - (fx - y) / d;
        newton_ok = (step_x > a && step_x < b);
      }
    }
    x = newton_ok ? step_x : 0.5 * (a + b);
    if (b - a < tol * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

// ---------------------------------------------------------------------------
// MonotoneTable (Fritsch-Carlson monotone cubic)

MonotoneTable::MonotoneTable(const std::function<double(double)>& f, double lo,
                             double hi, int n) {
  if (!(lo < hi)) throw argument_error("MonotoneTable: requires lo < hi");
  if (n < 4) throw argument_error("MonotoneTable: need at least 4 nodes");
  x_.resize(n);
  y_.resize(n);
  for (int i = 0; i < n; ++i) {
    x_[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    y_[i] = f(x_[i]);
  }
  build_slopes();
}

MonotoneTable MonotoneTable::from_values(std::vector<double> x,
                                         std::vector<double> y) {
  if (x.size() != y.size() || x.size() < 4)
    throw argument_error("MonotoneTable: bad node arrays");
  MonotoneTable t;
  t.x_ = std::move(x);
  t.y_ = std::move(y);
  t.build_slopes();
  return t;
}

void MonotoneTable::build_slopes() {
  const int n = static_cast<int>(x_.size());
  for (int i = 0; i + 1 < n; ++i) {
    if (!(x_[i] < x_[i + 1]))
      throw argument_error("MonotoneTable: nodes must be strictly increasing");
    if (y_[i + 1] < y_[i] - 1e-14 * std::max(1.0, std::abs(y_[i])))
      throw argument_error("MonotoneTable: values must be nondecreasing");
  }
  std::vector<double> d(n - 1);
  for (int i = 0; i + 1 < n; ++i)
    d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  m_.assign(n, 0.0);
  m_[0] = d[0];
  m_[n - 1] = d[n - 2];
  for (int i = 1; i + 1 < n; ++i)
    m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
  for (int i = 0; i + 1 < n; ++i) {
    if (d[i] == 0.0) {
      m_[i] = m_[i + 1] = 0.0;
      continue;
    }
    double a = m_[i] / d[i], b = m_[i + 1] / d[i];
    double s = a * a + b * b;
    if (s > 9.0) {
      double tau = 3.0 / std::sqrt(s);
      m_[i] = tau * a * d[i];
      m_[i + 1] = tau * b * d[i];
    }
  }
}

int MonotoneTable::segment_of(double x) const {
  const int n = static_cast<int>(x_.size());
  if (x <= x_.front()) return 0;
  if (x >= x_.back()) return n - 2;
  int k = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), x) -
                           x_.begin()) - 1;
  return std::clamp(k, 0, n - 2);
}

double MonotoneTable::value(double x) const {
  int k = segment_of(x);
  double h = x_[k + 1] - x_[k];
  double t = (x - x_[k]) / h;
  double t2 = t * t, t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * y_[k] + h10 * h * m_[k] + h01 * y_[k + 1] + h11 * h * m_[k + 1];
}

double MonotoneTable::derivative(double x) const {
  int k = segment_of(x);
  double h = x_[k + 1] - x_[k];
  double t = (x - x_[k]) / h;
  double dh00 = (6 * t * t - 6 * t) / h, dh10 = (3 * t * t - 4 * t + 1) / h;
  double dh01 = (-6 * t * t + 6 * t) / h, dh11 = (3 * t * t - 2 * t) / h;
  return dh00 * y_[k] + dh10 * h * m_[k] + dh01 * y_[k + 1] + dh11 * h * m_[k + 1];
}

double MonotoneTable::inverse(double y) const {
  const int n = static_cast<int>(x_.size());
  double span = std::max(1.0, y_.back() - y_.front());
  if (y < y_.front() - 1e-9 * span || y > y_.back() + 1e-9 * span)
    throw range_error("MonotoneTable::inverse: value outside table range");
  y = std::clamp(y, y_.front(), y_.back());
  int k = static_cast<int>(std::upper_bound(y_.begin(), y_.end(), y) -
                           y_.begin()) - 1;
  k = std::clamp(k, 0, n - 2);
  double a = x_[k], b = x_[k + 1];
  double x = (y_[k + 1] > y_[k])
                 ? a + (b - a) * (y - y_[k]) / (y_[k + 1] - y_[k])
                 : 0.5 * (a + b);
  for (int it = 0; it < 60; ++it) {
    double fx = value(x) - y;
    if (fx > 0)
      b = x;
    else
      a = x;
    double d = derivative(x);
    double nx = (d > 0) ? x - fx / d : 0.5 * (a + b);
    if (!(nx > a && nx < b)) nx = 0.5 * (a + b);
    if (std::abs(nx - x) < 1e-15 * std::max(1.0, std::abs(x))) return nx;
    x = nx;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Point sets

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double scale = inv;
  double r = 0.0;
  while (i > 0) {
    r += static_cast<double>(i % base) * scale;
    i /= base;
    scale *= inv;
  }
  return r;
}

constexpr std::uint64_t kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                     23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

Eigen::MatrixXd halton_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              int n) {
  const int d = static_cast<int>(lo.size());
  if (d < 1 || d > 16) throw argument_error("halton_points: dimension out of range");
  if (hi.size() != d) throw argument_error("halton_points: lo/hi size mismatch");
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      pts(i, j) = lo(j) + (hi(j) - lo(j)) * radical_inverse(i + 1, kPrimes[j]);
  return pts;
}

Eigen::MatrixXd default_test_points(const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi, int n_high_dim) {
  const int d = static_cast<int>(lo.size());
  if (d < 1 || d > 16)
    throw argument_error("default_test_points: dimension out of range");
  if (d <= 3) {
    const int g = 5;
    int total = 1;
    for (int j = 0; j < d; ++j) total *= g;
    Eigen::MatrixXd pts(total, d);
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      for (int j = 0; j < d; ++j) {
        int cell = rem % g;
        rem /= g;
        pts(idx, j) = lo(j) + (hi(j) - lo(j)) * (cell + 0.5) / g;
      }
    }
    return pts;
  }
  return halton_points(lo, hi, n_high_dim);
}

// ---------------------------------------------------------------------------
// Reductions and determinants

double pairwise_sum(const double* data, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw argument_error("pairwise_mean: empty input");
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

MeanStderr mean_and_stderr(const std::vector<double>& v) {
  MeanStderr out;
  const std::size_t n = v.size();
  if (n == 0) throw argument_error("mean_and_stderr: empty input");
  out.mean = pairwise_mean(v);
  if (n == 1) return out;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dlt = v[i] - out.mean;
    sq[i] = dlt * dlt;
  }
  double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
  out.standard_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

double det_small(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw argument_error("det_small: matrix not square");
  switch (m.rows()) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default:
      return Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant();
  }
}

double log_abs_det(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw argument_error("log_abs_det: matrix not square");
  if (m.rows() <= 3) {
    double det = det_small(m);
    return std::log(std::abs(det));
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  double acc = 0.0;
  for (int i = 0; i < m.rows(); ++i) {
    double u = std::abs(lu.matrixLU()(i, i));
    if (u == 0.0) return -std::numeric_limits<double>::infinity();
    acc += std::log(u);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Worker pool

int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("ICA_LAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = std::min<long>(hw, v);
  }
  return hw;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ica_lab
