#pragma once

#include <Eigen/Dense>
#include <limits>

#include "ica_lab/errors.hpp"

namespace ica_lab {

/// Region of R^d a map or field is defined on.  Boxes are open; the
/// punctured kind excludes a small ball around a marked point; balls are
/// closed (used for compact supports).
struct Domain {
  enum class Kind { All, Box, Punctured, Ball };

  Kind kind = Kind::All;
  int dim = 0;
  Eigen::VectorXd lo, hi;       // Box
  Eigen::VectorXd center;       // Punctured / Ball
  double radius = 0.0;          // Punctured: excluded radius; Ball: support radius

  static Domain all(int d) {
    Domain dom;
    dom.kind = Kind::All;
    dom.dim = d;
    return dom;
  }

  static Domain box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw argument_error("Domain::box: lo/hi size mismatch");
    if ((lo.array() >= hi.array()).any())
      throw argument_error("Domain::box: requires lo < hi componentwise");
    Domain dom;
    dom.kind = Kind::Box;
    dom.dim = static_cast<int>(lo.size());
    dom.lo = lo;
    dom.hi = hi;
    return dom;
  }

  static Domain unit_cube(int d) {
    return box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
  }

  static Domain punctured(const Eigen::VectorXd& center, double excluded_radius) {
    Domain dom;
    dom.kind = Kind::Punctured;
    dom.dim = static_cast<int>(center.size());
    dom.center = center;
    dom.radius = excluded_radius;
    return dom;
  }

  static Domain ball(const Eigen::VectorXd& center, double radius) {
    Domain dom;
    dom.kind = Kind::Ball;
    dom.dim = static_cast<int>(center.size());
    dom.center = center;
    dom.radius = radius;
    return dom;
  }

  /// True when x lies inside, staying `margin` away from any boundary.
  bool contains(const Eigen::VectorXd& x, double margin = 0.0) const {
    if (x.size() != dim) return false;
    switch (kind) {
      case Kind::All:
        return true;
      case Kind::Box:
        return (x.array() > lo.array() + margin).all() &&
               (x.array() < hi.array() - margin).all();
      case Kind::Punctured:
        return (x - center).norm() > radius + margin;
      case Kind::Ball:
        return (x - center).norm() <= radius - margin;
    }
    return false;
  }

  bool is_bounded() const { return kind == Kind::Box || kind == Kind::Ball; }
};

}  // namespace ica_lab
