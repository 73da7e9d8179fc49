#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>

#include "ica_lab/domain.hpp"

namespace ica_lab {

/// A (possibly time-dependent) vector field on R^d.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual int dim() const = 0;
  virtual Eigen::VectorXd evaluate(double t, const Eigen::VectorXd& x) const = 0;

  virtual bool has_jacobian() const { return false; }
  /// Spatial derivative of the field at (t, x).
  virtual Eigen::MatrixXd jacobian(double t, const Eigen::VectorXd& x) const;

  /// Where the field may be nonzero.  Kind::Ball marks compact support.
  virtual const Domain& support() const { return support_; }
  virtual std::string name() const { return "vector_field"; }

 protected:
  void set_support(Domain d) { support_ = std::move(d); }

 private:
  Domain support_ = Domain::all(0);
};

using FieldPtr = std::shared_ptr<const VectorField>;

/// Wraps a plain callable as a VectorField.
class FunctionalField final : public VectorField {
 public:
  using Fn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

  FunctionalField(int d, Fn f, std::string label = "functional_field")
      : d_(d), f_(std::move(f)), label_(std::move(label)) {
    set_support(Domain::all(d_));
  }

  void set_support_public(Domain dom) { set_support(std::move(dom)); }

  int dim() const override { return d_; }
  Eigen::VectorXd evaluate(double t, const Eigen::VectorXd& x) const override {
    return f_(t, x);
  }
  std::string name() const override { return label_; }

 private:
  int d_;
  Fn f_;
  std::string label_;
};

}  // namespace ica_lab
