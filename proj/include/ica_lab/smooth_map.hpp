#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

#include "ica_lab/domain.hpp"
#include "ica_lab/errors.hpp"

namespace ica_lab {

/// A smooth map R^d -> R^d.  Implementations provide evaluation and,
/// when available, an analytic Jacobian, inverse and log|det|.  The
/// Jacobian falls back to central finite differences; log|det| falls
/// back to the Jacobian.
class SmoothMap {
 public:
  virtual ~SmoothMap() = default;

  virtual int dim() const = 0;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const = 0;

  /// d x d spatial derivative at x (column j = d evaluate / d x_j).
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  virtual bool has_inverse() const { return false; }
  virtual Eigen::VectorXd inverse(const Eigen::VectorXd& y) const {
    (void)y;
    throw capability_error(name() + ": inverse not available");
  }

  /// log |det D evaluate(x)|.
  virtual double log_abs_det_jacobian(const Eigen::VectorXd& x) const;

  virtual const Domain& domain() const { return domain_; }
  virtual std::string name() const { return "smooth_map"; }

 protected:
  void set_domain(Domain d) { domain_ = std::move(d); }

 private:
  Domain domain_ = Domain::all(0);
};

using MapPtr = std::shared_ptr<const SmoothMap>;

/// Wraps plain callables as a SmoothMap; handy in tests and for ad-hoc maps.
class FunctionalMap final : public SmoothMap {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using JacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  FunctionalMap(int d, Fn f, JacFn jac = nullptr, Fn inv = nullptr,
                std::string label = "functional")
      : d_(d), f_(std::move(f)), jac_(std::move(jac)), inv_(std::move(inv)),
        label_(std::move(label)) {
    set_domain(Domain::all(d_));
  }

  void set_domain_public(Domain dom) { set_domain(std::move(dom)); }

  int dim() const override { return d_; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override { return f_(x); }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override {
    if (jac_) return jac_(x);
    return SmoothMap::jacobian(x);
  }
  bool has_inverse() const override { return static_cast<bool>(inv_); }
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override {
    if (!inv_) throw capability_error(label_ + ": inverse not available");
    return inv_(y);
  }
  std::string name() const override { return label_; }

 private:
  int d_;
  Fn f_;
  JacFn jac_;
  Fn inv_;
  std::string label_;
};

/// outer after inner.  The inner domain is the composite domain; points are
/// checked against the outer domain lazily, at evaluation time.
class ComposedMap final : public SmoothMap {
 public:
  ComposedMap(MapPtr outer, MapPtr inner);

  int dim() const override { return inner_->dim(); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  bool has_inverse() const override {
    return outer_->has_inverse() && inner_->has_inverse();
  }
  Eigen::VectorXd inverse(const Eigen::VectorXd& y) const override;
  double log_abs_det_jacobian(const Eigen::VectorXd& x) const override;
  const Domain& domain() const override { return inner_->domain(); }
  std::string name() const override {
    return outer_->name() + "∘" + inner_->name();
  }

 private:
  MapPtr outer_, inner_;
};

MapPtr compose(MapPtr outer, MapPtr inner);

}  // namespace ica_lab
