#pragma once

#include <stdexcept>
#include <string>

namespace ica_lab {

/// Base class for every error thrown by this library.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A point fell outside the domain a map or field is defined on.
class domain_error : public error {
 public:
  using error::error;
};

/// An evaluation hit (or came too close to) a singular locus.
class singularity_error : public error {
 public:
  using error::error;
};

/// Invalid argument values (bad shapes, non-orthogonal matrices, ...).
class argument_error : public error {
 public:
  using error::error;
};

/// An ODE solve produced non-finite state; carries the failure time.
class integration_error : public error {
 public:
  integration_error(const std::string& what, double t_fail)
      : error(what), t_fail_(t_fail) {}
  double t_fail() const { return t_fail_; }

 private:
  double t_fail_ = 0.0;
};

/// A requested tolerance could not be met within the allotted work.
class precision_error : public error {
 public:
  using error::error;
};

/// A root/inversion target lies outside the bracketing interval.
class range_error : public error {
 public:
  using error::error;
};

/// The object does not support the requested operation (e.g. no inverse).
class capability_error : public error {
 public:
  using error::error;
};

/// A check was invoked on an object that violates its precondition.
class precondition_error : public error {
 public:
  using error::error;
};

/// A Monte Carlo estimate had to drop too many samples to be trusted.
class estimation_error : public error {
 public:
  using error::error;
};

/// Optimization produced non-finite losses or failed to reach its target.
class training_error : public error {
 public:
  using error::error;
};

/// Non-finite intermediate values in model evaluation; carries the layer.
class numeric_error : public error {
 public:
  numeric_error(const std::string& what, int layer) : error(what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_ = -1;
};

/// A config file or checkpoint does not match the expected schema.
class schema_error : public error {
 public:
  using error::error;
};

}  // namespace ica_lab
