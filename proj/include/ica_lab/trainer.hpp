#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ica_lab/flow_model.hpp"
#include "ica_lab/rng.hpp"
#include "ica_lab/smooth_map.hpp"
#include "ica_lab/tape.hpp"

namespace ica_lab {

/// Ground-truth data-generating family for the drift experiment: a planar
/// map f_t of a latent standard normal, drifting over t in [0, 1].
///
/// - rot: f_t(s) = R(t) diag(2, 1) s with R(t) the rotation by angle t.
///   Invertible linear family; the identifiable case.
/// - pol: f_t = (r, phi) -> (r sin phi, r cos phi) composed after
///   h_t(s) = (s1 + (t/2) sin(s1 + t) + 3, (s2 + t)/2); latent draws are
///   rejection-truncated to |s| < 4 so the angular coordinate stays in a
///   fixed branch.  The orthogonal-column (non-identifiable) case.
class DriftScenario {
 public:
  enum class Kind { Rot, Pol };

  static DriftScenario rot();
  static DriftScenario pol();

  Kind kind() const { return kind_; }
  std::string name() const { return kind_ == Kind::Rot ? "rot" : "pol"; }

  /// The time-t target map as a SmoothMap (analytic Jacobian; the rot family
  /// is invertible, the pol family is not).
  MapPtr map_at(double t) const;

  Eigen::Vector2d sample_latent(RngStream& rng) const;
  double latent_log_density(const Eigen::Vector2d& s) const;

  /// Draw x ~ q_t together with log q_t(x).
  std::pair<Eigen::VectorXd, double> sample_observed(double t, RngStream& rng) const;

  /// log |det Df_t(s)|.
  double log_abs_det_at_latent(double t, const Eigen::Vector2d& s) const;

 private:
  explicit DriftScenario(Kind k) : kind_(k) {}
  Kind kind_;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  double lambda = 0.0;         // weight of the column-orthogonality penalty
  int steps_per_segment = 1000;
  int batch = 256;
  int time_points = 10;        // drift grid: t = k / time_points, k = 1..time_points
  int n_layers = 5;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  int pretrain_budget = 6000;
  int pretrain_check_interval = 200;
  double pretrain_target_kl = 0.1;
  double pretrain_fail_kl = 1.0;

  int l1_samples = 8192;
  int kl_samples = 8192;
  int c_oct_samples = 4096;
};

struct TraceRow {
  double t = 0.0;
  double l1 = 0.0;
  double kl = 0.0;
  double c_oct = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<double> pretrain_loss;
  std::vector<double> drift_loss;
  double pretrain_final_kl = 0.0;
  int pretrain_steps = 0;

  static std::string csv_header() { return "t,l1,kl,c_oct,arm,seed"; }
  std::string to_csv() const;  // header + one line per row
};

struct TrainResult {
  FlowModel model;
  TrainTrace trace;
};

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;
  void init(int n) {
    m.setZero(n);
    v.setZero(n);
    t = 0;
  }
};

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const TrainConfig& cfg);

/// Negative mean log-likelihood of the batch plus lambda times the mean
/// column-orthogonality defect, with the gradient via one reverse sweep.
/// Rows of `batch` are observed points.
double loss_and_grad(const FlowModel& model, const Eigen::MatrixXd& batch,
                     double lambda, Tape& tape, Eigen::VectorXd& grad);

/// Loss without gradient (plain double path; used to cross-check the tape).
double loss_value(const FlowModel& model, const Eigen::MatrixXd& batch,
                  double lambda);

/// Mean squared deviation  E_s |g(s) - target(s)|^2  of the forward map from
/// per-row targets, with the gradient via one reverse sweep.  Used to pin the
/// initial model to the known t = 0 mixing, which removes the permutation and
/// reflection ambiguities before the drift phase starts.
double map_fit_loss_and_grad(const FlowModel& model,
                             const Eigen::MatrixXd& latents,
                             const Eigen::MatrixXd& targets, Tape& tape,
                             Eigen::VectorXd& grad);

/// Same objective without the gradient (plain double path cross-check).
double map_fit_value(const FlowModel& model, const Eigen::MatrixXd& latents,
                     const Eigen::MatrixXd& targets);

/// Fits a fresh model to the t = 0 distribution until the forward KL drops
/// under cfg.pretrain_target_kl (checked every pretrain_check_interval
/// steps) or the budget runs out.  Throws training_error when the final KL
/// is still >= cfg.pretrain_fail_kl.
TrainResult pretrain_t0(const DriftScenario& scenario, const TrainConfig& cfg);

/// Full run: pretrain at t = 0, then adapt through the drift grid, recording
/// reconstruction, KL and column-defect metrics after every segment.
TrainResult drift_train(const DriftScenario& scenario, const TrainConfig& cfg);

/// Forward KL of the model against the scenario at time t (fresh substream
/// of cfg.seed, so repeated calls agree).
double scenario_kl(const DriftScenario& scenario, const FlowModel& model,
                   double t, const TrainConfig& cfg, std::uint64_t stream_index);

}  // namespace ica_lab
