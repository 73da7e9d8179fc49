#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ica_lab/smooth_map.hpp"
#include "ica_lab/tape.hpp"

namespace ica_lab {

constexpr int kFlowDim = 2;
constexpr int kLayerParams = kCondParams;  // 62
constexpr double kLogScaleClamp = 7.0;

/// Soft clamp of the raw log-scale head into (-clamp, clamp); smooth, so
/// finite-difference checks of the training gradient stay clean.
inline double soft_clamp(double raw) {
  return kLogScaleClamp * std::tanh(raw / kLogScaleClamp);
}
inline double soft_clamp_derivative(double raw) {
  double th = std::tanh(raw / kLogScaleClamp);
  return 1.0 - th * th;
}

/// Planar autoregressive flow: a stack of masked affine layers, each with a
/// one-hidden-layer tanh conditioner (width kCondHidden) mapping the
/// conditioning coordinate to a shift and a log-scale for the other
/// coordinate, followed by an optional coordinate swap.  Invertible in
/// closed form in both directions.
struct FlowModel {
  int n_layers = 5;
  std::vector<int> swap_after;   // one flag per layer
  std::vector<int> cond_coord;   // which coordinate conditions (0 or 1)
  Eigen::VectorXd params;        // n_layers * kLayerParams
  std::uint64_t seed = 0;

  /// Fresh model: weights ~ N(0, 0.1^2), zero biases, random swaps; all
  /// randomness derived from `seed`.
  static FlowModel init(std::uint64_t seed, int n_layers = 5);

  int param_count() const { return n_layers * kLayerParams; }
  const double* layer_params(int layer) const {
    return params.data() + layer * kLayerParams;
  }

  struct EvalResult {
    Eigen::Vector2d point;
    double log_det = 0.0;  // log |det D forward| at the latent input
  };

  /// Latent -> observed.
  EvalResult forward(const Eigen::Vector2d& s) const;
  /// Observed -> latent; log_det still refers to the forward map.
  EvalResult inverse(const Eigen::Vector2d& x) const;
  /// Model log-density of an observed point (standard normal base).
  double log_density(const Eigen::Vector2d& x) const;
  /// Analytic Jacobian of forward at latent s.
  Eigen::Matrix2d jacobian(const Eigen::Vector2d& s) const;

  /// Column-orthogonality defect of the forward Jacobian at latent s.
  double column_defect(const Eigen::Vector2d& s) const;

  /// Sign of det D(forward), +1 or -1. Layer scales are exp(log-scale) > 0,
  /// so the determinant sign is fixed by the permutation parity alone and is
  /// the same at every point and for all parameter values.
  int orientation_sign() const;

  /// SmoothMap views (forward map and its inverse as a map of its own).
  MapPtr as_map() const;
  MapPtr inverse_as_map() const;

  /// Versioned JSON checkpoint.
  void save(const std::string& path, const std::string& config_hash = "") const;
  static FlowModel load(const std::string& path);
  std::string to_json(const std::string& config_hash) const;
  static FlowModel from_json(const std::string& text);
};

}  // namespace ica_lab
