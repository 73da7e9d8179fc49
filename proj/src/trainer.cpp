#include "ica_lab/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ica_lab/maps.hpp"
#include "ica_lab/metrics.hpp"

namespace ica_lab {

// ---------------------------------------------------------------------------
// DriftScenario

DriftScenario DriftScenario::rot() { return DriftScenario(Kind::Rot); }
DriftScenario DriftScenario::pol() { return DriftScenario(Kind::Pol); }

namespace {

// rot target: x = R(t) diag(2,1) s
Eigen::Matrix2d rot_matrix(double t) {
  Eigen::Matrix2d a;
  double c = std::cos(t), s = std::sin(t);
  a << 2.0 * c, s, -2.0 * s, c;
  return a;
}

// pol target pieces
inline double pol_radius(double t, double s1) {
  return s1 + 0.5 * t * std::sin(s1 + t) + 3.0;
}
inline double pol_radius_deriv(double t, double s1) {
  return 1.0 + 0.5 * t * std::cos(s1 + t);
}

Eigen::Vector2d pol_eval(double t, const Eigen::Vector2d& s) {
  double r = pol_radius(t, s(0));
  double phi = 0.5 * (s(1) + t);
  return {r * std::sin(phi), r * std::cos(phi)};
}

Eigen::Matrix2d pol_jacobian(double t, const Eigen::Vector2d& s) {
  double r = pol_radius(t, s(0));
  double dr = pol_radius_deriv(t, s(0));
  double phi = 0.5 * (s(1) + t);
  Eigen::Matrix2d jac;
  jac << std::sin(phi) * dr, 0.5 * r * std::cos(phi),
         std::cos(phi) * dr, -0.5 * r * std::sin(phi);
  return jac;
}

constexpr double kPolTruncRadius = 4.0;
// Gaussian mass of the disc |s| < 4 in the plane.
const double kPolLogTruncMass = std::log1p(-std::exp(-8.0));

}  // namespace

MapPtr DriftScenario::map_at(double t) const {
  if (kind_ == Kind::Rot)
    return std::make_shared<LinearMap>(rot_matrix(t));
  return std::make_shared<FunctionalMap>(
      2,
      [t](const Eigen::VectorXd& s) {
        return Eigen::VectorXd(pol_eval(t, Eigen::Vector2d(s)));
      },
      [t](const Eigen::VectorXd& s) {
        return Eigen::MatrixXd(pol_jacobian(t, Eigen::Vector2d(s)));
      },
      nullptr, "pol_target");
}

Eigen::Vector2d DriftScenario::sample_latent(RngStream& rng) const {
  if (kind_ == Kind::Rot) return {rng.normal(), rng.normal()};
  for (;;) {
    Eigen::Vector2d s(rng.normal(), rng.normal());
    if (s.norm() < kPolTruncRadius) return s;
  }
}

double DriftScenario::latent_log_density(const Eigen::Vector2d& s) const {
  double base = -std::log(2.0 * M_PI) - 0.5 * s.squaredNorm();
  if (kind_ == Kind::Rot) return base;
  if (s.norm() >= kPolTruncRadius)
    return -std::numeric_limits<double>::infinity();
  return base - kPolLogTruncMass;
}

double DriftScenario::log_abs_det_at_latent(double t,
                                            const Eigen::Vector2d& s) const {
  if (kind_ == Kind::Rot) return std::log(2.0);
  double r = pol_radius(t, s(0));
  double dr = pol_radius_deriv(t, s(0));
  return std::log(std::abs(r)) + std::log(std::abs(dr)) + std::log(0.5);
}

std::pair<Eigen::VectorXd, double> DriftScenario::sample_observed(
    double t, RngStream& rng) const {
  Eigen::Vector2d s = sample_latent(rng);
  double log_q = latent_log_density(s) - log_abs_det_at_latent(t, s);
  Eigen::Vector2d x = (kind_ == Kind::Rot)
                          ? Eigen::Vector2d(rot_matrix(t) * s)
                          : pol_eval(t, s);
  return {Eigen::VectorXd(x), log_q};
}

// ---------------------------------------------------------------------------
// Constant-folding wrapper over tape nodes

namespace {

struct TV {
  int node = -1;
  double c = 0.0;
  bool is_const() const { return node < 0; }
};

inline TV tvc(double c) { return {-1, c}; }
inline TV tvn(int node) { return {node, 0.0}; }

inline int materialize(Tape& t, TV a) {
  return a.is_const() ? t.leaf(a.c) : a.node;
}

inline TV tv_add(Tape& t, TV a, TV b) {
  if (a.is_const() && b.is_const()) return tvc(a.c + b.c);
  if (a.is_const()) return a.c == 0.0 ? b : tvn(t.add_c(b.node, a.c));
  if (b.is_const()) return b.c == 0.0 ? a : tvn(t.add_c(a.node, b.c));
  return tvn(t.add(a.node, b.node));
}

inline TV tv_sub(Tape& t, TV a, TV b) {
  if (a.is_const() && b.is_const()) return tvc(a.c - b.c);
  if (b.is_const()) return b.c == 0.0 ? a : tvn(t.add_c(a.node, -b.c));
  if (a.is_const()) return tvn(t.c_sub(a.c, b.node));
  return tvn(t.sub(a.node, b.node));
}

inline TV tv_mul(Tape& t, TV a, TV b) {
  if (a.is_const() && b.is_const()) return tvc(a.c * b.c);
  if (a.is_const()) {
    if (a.c == 0.0) return tvc(0.0);
    if (a.c == 1.0) return b;
    return tvn(t.mul_c(b.node, a.c));
  }
  if (b.is_const()) {
    if (b.c == 0.0) return tvc(0.0);
    if (b.c == 1.0) return a;
    return tvn(t.mul_c(a.node, b.c));
  }
  return tvn(t.mul(a.node, b.node));
}

inline TV tv_square(Tape& t, TV a) {
  return a.is_const() ? tvc(a.c * a.c) : tvn(t.square(a.node));
}
inline TV tv_log(Tape& t, TV a) {
  return a.is_const() ? tvc(std::log(a.c)) : tvn(t.log_(a.node));
}
inline TV tv_tanh(Tape& t, TV a) {
  return a.is_const() ? tvc(std::tanh(a.c)) : tvn(t.tanh_(a.node));
}
inline TV tv_exp(Tape& t, TV a) {
  return a.is_const() ? tvc(std::exp(a.c)) : tvn(t.exp_(a.node));
}
inline TV tv_recip(Tape& t, TV a) {
  return a.is_const() ? tvc(1.0 / a.c) : tvn(t.recip(a.node));
}

// Emits the per-sample objective: negative log-likelihood of x plus
// lambda times the column-orthogonality defect at the recovered latent.
TV emit_sample(Tape& tape, const FlowModel& model, const Eigen::Vector2d& x,
               double lambda) {
  const bool lam_on = lambda != 0.0;
  TV v[2] = {tvc(x(0)), tvc(x(1))};
  TV jm[2][2];
  bool j_init = false;
  TV sig_sum = tvc(0.0);

  for (int l = model.n_layers - 1; l >= 0; --l) {
    if (model.swap_after[l]) std::swap(v[0], v[1]);
    const int cc = model.cond_coord[l];
    const int oc = 1 - cc;
    const int u_node = materialize(tape, v[cc]);
    Tape::CondOutputs co =
        tape.conditioner(u_node, l * kLayerParams, lam_on);

    TV th = tv_tanh(tape, tv_mul(tape, tvn(co.sigma_raw),
                                 tvc(1.0 / kLogScaleClamp)));
    TV sig = tv_mul(tape, th, tvc(kLogScaleClamp));
    TV es = tv_exp(tape, sig);
    TV es_inv = tv_recip(tape, es);
    v[oc] = tv_mul(tape, tv_sub(tape, v[oc], tvn(co.m)), es_inv);
    v[cc] = tvn(u_node);
    sig_sum = tv_add(tape, sig_sum, sig);

    if (lam_on) {
      TV dclamp = tv_sub(tape, tvc(1.0), tv_square(tape, th));
      TV dsig = tv_mul(tape, dclamp, tvn(co.dsig));
      TV alpha = tv_add(
          tape, tv_mul(tape, tv_mul(tape, v[oc], es), dsig), tvn(co.dm));
      const int rs = model.swap_after[l] ? oc : cc;  // row carrying (1, 0)
      const int rf = 1 - rs;
      if (!j_init) {
        jm[rs][cc] = tvc(1.0);
        jm[rs][oc] = tvc(0.0);
        jm[rf][cc] = alpha;
        jm[rf][oc] = es;
        j_init = true;
      } else {
        for (int i = 0; i < 2; ++i) {
          TV mi_rs = jm[i][rs], mi_rf = jm[i][rf];
          jm[i][cc] = tv_add(tape, mi_rs, tv_mul(tape, mi_rf, alpha));
          jm[i][oc] = tv_mul(tape, mi_rf, es);
        }
      }
    }
  }

  TV ss = tv_add(tape, tv_square(tape, v[0]), tv_square(tape, v[1]));
  TV base = tv_add(tape, tv_mul(tape, ss, tvc(-0.5)),
                   tvc(-std::log(2.0 * M_PI)));
  TV total = tv_sub(tape, sig_sum, base);  // negative log-likelihood

  if (lam_on) {
    TV col0 = tv_add(tape, tv_square(tape, jm[0][0]), tv_square(tape, jm[1][0]));
    TV col1 = tv_add(tape, tv_square(tape, jm[0][1]), tv_square(tape, jm[1][1]));
    TV defect = tv_sub(
        tape,
        tv_add(tape, tv_mul(tape, tv_log(tape, col0), tvc(0.5)),
               tv_mul(tape, tv_log(tape, col1), tvc(0.5))),
        sig_sum);
    total = tv_add(tape, total, tv_mul(tape, defect, tvc(lambda)));
  }
  return total;
}

// Emits the forward image g(s) of one latent point and its squared distance
// to the regression target.
TV emit_map_fit_sample(Tape& tape, const FlowModel& model,
                       const Eigen::Vector2d& s, const Eigen::Vector2d& x) {
  TV v[2] = {tvc(s(0)), tvc(s(1))};
  for (int l = 0; l < model.n_layers; ++l) {
    const int cc = model.cond_coord[l];
    const int oc = 1 - cc;
    const int u_node = materialize(tape, v[cc]);
    Tape::CondOutputs co = tape.conditioner(u_node, l * kLayerParams, false);
    TV th = tv_tanh(tape, tv_mul(tape, tvn(co.sigma_raw),
                                 tvc(1.0 / kLogScaleClamp)));
    TV sig = tv_mul(tape, th, tvc(kLogScaleClamp));
    TV es = tv_exp(tape, sig);
    v[oc] = tv_add(tape, tvn(co.m), tv_mul(tape, v[oc], es));
    v[cc] = tvn(u_node);
    if (model.swap_after[l]) std::swap(v[0], v[1]);
  }
  TV d0 = tv_sub(tape, v[0], tvc(x(0)));
  TV d1 = tv_sub(tape, v[1], tvc(x(1)));
  return tv_add(tape, tv_square(tape, d0), tv_square(tape, d1));
}

}  // namespace

double map_fit_loss_and_grad(const FlowModel& model,
                             const Eigen::MatrixXd& latents,
                             const Eigen::MatrixXd& targets, Tape& tape,
                             Eigen::VectorXd& grad) {
  const int n = static_cast<int>(latents.rows());
  if (n < 1) throw argument_error("map_fit_loss_and_grad: empty batch");
  if (latents.cols() != kFlowDim || targets.rows() != n ||
      targets.cols() != kFlowDim)
    throw argument_error("map_fit_loss_and_grad: shape mismatch");
  const int n_params = model.param_count();

  tape.reset();
  tape.reserve(static_cast<std::size_t>(n_params) + 96u * n);
  for (int i = 0; i < n_params; ++i) tape.leaf(model.params(i));

  TV total = tvc(0.0);
  for (int b = 0; b < n; ++b) {
    TV sample = emit_map_fit_sample(tape, model, latents.row(b).transpose(),
                                    targets.row(b).transpose());
    total = tv_add(tape, total, sample);
  }
  TV loss_tv = tv_mul(tape, total, tvc(1.0 / n));
  const int loss_node = materialize(tape, loss_tv);
  const double loss = tape.value(loss_node);
  if (!std::isfinite(loss))
    throw training_error("map_fit_loss_and_grad: non-finite loss");

  tape.backward(loss_node);
  grad.resize(n_params);
  for (int i = 0; i < n_params; ++i) grad(i) = tape.adjoint(i);
  return loss;
}

double map_fit_value(const FlowModel& model, const Eigen::MatrixXd& latents,
                     const Eigen::MatrixXd& targets) {
  const int n = static_cast<int>(latents.rows());
  if (n < 1) throw argument_error("map_fit_value: empty batch");
  double acc = 0.0;
  for (int b = 0; b < n; ++b) {
    Eigen::Vector2d y = model.forward(latents.row(b).transpose()).point;
    acc += (y - Eigen::Vector2d(targets.row(b).transpose())).squaredNorm();
  }
  return acc / n;
}

double loss_and_grad(const FlowModel& model, const Eigen::MatrixXd& batch,
                     double lambda, Tape& tape, Eigen::VectorXd& grad) {
  const int n = static_cast<int>(batch.rows());
  if (n < 1) throw argument_error("loss_and_grad: empty batch");
  if (batch.cols() != kFlowDim)
    throw argument_error("loss_and_grad: batch must have two columns");
  const int n_params = model.param_count();

  tape.reset();
  tape.reserve(static_cast<std::size_t>(n_params) + 160u * n);
  for (int i = 0; i < n_params; ++i) tape.leaf(model.params(i));

  TV total = tvc(0.0);
  for (int b = 0; b < n; ++b) {
    TV sample = emit_sample(tape, model, batch.row(b).transpose(), lambda);
    total = tv_add(tape, total, sample);
  }
  TV loss_tv = tv_mul(tape, total, tvc(1.0 / n));
  const int loss_node = materialize(tape, loss_tv);
  const double loss = tape.value(loss_node);
  if (!std::isfinite(loss))
    throw training_error("loss_and_grad: non-finite loss");

  tape.backward(loss_node);
  grad.resize(n_params);
  for (int i = 0; i < n_params; ++i) grad(i) = tape.adjoint(i);
  return loss;
}

double loss_value(const FlowModel& model, const Eigen::MatrixXd& batch,
                  double lambda) {
  const int n = static_cast<int>(batch.rows());
  if (n < 1) throw argument_error("loss_value: empty batch");
  double acc = 0.0;
  for (int b = 0; b < n; ++b) {
    Eigen::Vector2d x = batch.row(b).transpose();
    FlowModel::EvalResult inv = model.inverse(x);
    double base = -std::log(2.0 * M_PI) - 0.5 * inv.point.squaredNorm();
    double nll = inv.log_det - base;
    acc += nll;
    if (lambda != 0.0) acc += lambda * model.column_defect(inv.point);
  }
  return acc / n;
}

// ---------------------------------------------------------------------------
// Optimization

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) state.init(static_cast<int>(params.size()));
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  Eigen::ArrayXd m_hat = state.m.array() / bc1;
  Eigen::ArrayXd v_hat = state.v.array() / bc2;
  params.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
}

double scenario_kl(const DriftScenario& scenario, const FlowModel& model,
                   double t, const TrainConfig& cfg, std::uint64_t stream_index) {
  RngStream rng = RngStream::substream(cfg.seed, "kl_eval", stream_index);
  TargetSampler target = [&](RngStream& r) {
    return scenario.sample_observed(t, r);
  };
  LogDensityFn logp = [&](const Eigen::VectorXd& x) {
    return model.log_density(Eigen::Vector2d(x));
  };
  return forward_kl(target, logp, cfg.kl_samples, rng).value;
}

namespace {

void fill_batch(const DriftScenario& scenario, double t, int n, RngStream& rng,
                Eigen::MatrixXd& batch) {
  batch.resize(n, kFlowDim);
  for (int b = 0; b < n; ++b)
    batch.row(b) = scenario.sample_observed(t, rng).first.transpose();
}

struct SegmentTrainer {
  const DriftScenario& scenario;
  const TrainConfig& cfg;
  FlowModel& model;
  AdamState& adam;
  Tape tape;
  Eigen::VectorXd grad;
  Eigen::MatrixXd batch;

  void run(double t, int steps, std::uint64_t data_stream_index,
           std::vector<double>& loss_log) {
    RngStream data =
        RngStream::substream(cfg.seed, "data", data_stream_index);
    for (int step = 0; step < steps; ++step) {
      fill_batch(scenario, t, cfg.batch, data, batch);
      double loss = loss_and_grad(model, batch, cfg.lambda, tape, grad);
      loss_log.push_back(loss);
      adam_step(adam, model.params, grad, cfg);
    }
  }
};

}  // namespace

TrainResult pretrain_t0(const DriftScenario& scenario, const TrainConfig& cfg) {
  if (cfg.batch < 1 || cfg.steps_per_segment < 0 || cfg.time_points < 1)
    throw argument_error("pretrain_t0: bad configuration");
  TrainResult result{FlowModel::init(cfg.seed, cfg.n_layers), {}};
  AdamState adam;
  adam.init(result.model.param_count());
  Tape tape;
  Eigen::VectorXd grad;

  // The initial model is pinned to the known t = 0 mixing itself (not just
  // its pushforward law): regression of g(s) onto f_0(s) over latent draws.
  // This anchors the source convention, so later reconstruction gaps measure
  // genuine drift away from the ground truth rather than an arbitrary choice
  // among equally likely transports.  The forward KL against the t = 0
  // observational law is the stopping and failure monitor.
  MapPtr f0 = scenario.map_at(0.0);

  // Layer scales are strictly positive, so the model's determinant sign is
  // locked to the permutation parity.  A map-level fit of f_0 is impossible
  // when that parity disagrees with the orientation of f_0 (e.g. polar-style
  // targets reverse orientation); align it by toggling the last swap flag,
  // which only relabels the output order of the final layer.
  const double det0 =
      f0->jacobian(Eigen::VectorXd::Zero(kFlowDim)).determinant();
  if ((det0 < 0.0) != (result.model.orientation_sign() < 0))
    result.model.swap_after[result.model.n_layers - 1] ^= 1;

  RngStream data = RngStream::substream(cfg.seed, "pretrain_latents", 0);
  Eigen::MatrixXd latents(cfg.batch, kFlowDim), targets(cfg.batch, kFlowDim);
  double kl = std::numeric_limits<double>::infinity();
  int steps = 0;
  while (steps < cfg.pretrain_budget) {
    for (int b = 0; b < cfg.batch; ++b) {
      latents.row(b) = scenario.sample_latent(data).transpose();
      targets.row(b) = f0->evaluate(latents.row(b).transpose()).transpose();
    }
    double loss =
        map_fit_loss_and_grad(result.model, latents, targets, tape, grad);
    result.trace.pretrain_loss.push_back(loss);
    adam_step(adam, result.model.params, grad, cfg);
    ++steps;
    if (steps % cfg.pretrain_check_interval == 0 || steps == cfg.pretrain_budget) {
      kl = scenario_kl(scenario, result.model, 0.0, cfg, 0);
      if (kl < cfg.pretrain_target_kl) break;
    }
  }
  result.trace.pretrain_steps = steps;
  result.trace.pretrain_final_kl = kl;
  if (!(kl < cfg.pretrain_fail_kl))
    throw training_error("pretrain_t0: forward KL stayed at " +
                         std::to_string(kl) + " after " +
                         std::to_string(steps) + " steps");
  return result;
}

TrainResult drift_train(const DriftScenario& scenario, const TrainConfig& cfg) {
  TrainResult result = pretrain_t0(scenario, cfg);
  AdamState adam;
  adam.init(result.model.param_count());
  SegmentTrainer trainer{scenario, cfg, result.model, adam, {}, {}, {}};

  for (int seg = 1; seg <= cfg.time_points; ++seg) {
    double t = static_cast<double>(seg) / cfg.time_points;
    trainer.run(t, cfg.steps_per_segment, static_cast<std::uint64_t>(seg),
                result.trace.drift_loss);

    // metrics after adapting to this segment
    TraceRow row;
    row.t = t;
    row.lambda = cfg.lambda;
    row.seed = cfg.seed;

    {
      RngStream rng = RngStream::substream(cfg.seed, "metrics_l1", seg);
      SampleBatch latents;
      latents.points.resize(cfg.l1_samples, kFlowDim);
      for (int i = 0; i < cfg.l1_samples; ++i)
        latents.points.row(i) = scenario.sample_latent(rng).transpose();
      MapPtr g_inv = result.model.inverse_as_map();
      MapPtr target = scenario.map_at(t);
      row.l1 = l1_recon(*g_inv, *target, latents).value;
    }
    row.kl = scenario_kl(scenario, result.model, t, cfg,
                         static_cast<std::uint64_t>(seg));
    {
      RngStream rng = RngStream::substream(cfg.seed, "metrics_coct", seg);
      SampleBatch latents;
      latents.points.resize(cfg.c_oct_samples, kFlowDim);
      for (int i = 0; i < cfg.c_oct_samples; ++i)
        latents.points.row(i) << rng.normal(), rng.normal();
      MapPtr fwd = result.model.as_map();
      row.c_oct = c_oct(*fwd, latents).value;
    }
    result.trace.rows.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trace serialization

std::string TrainTrace::to_csv() const {
  std::string out = csv_header() + "\n";
  char line[256];
  for (const TraceRow& r : rows) {
    std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%.10g,%g,%llu\n", r.t,
                  r.l1, r.kl, r.c_oct, r.lambda,
                  static_cast<unsigned long long>(r.seed));
    out += line;
  }
  return out;
}

}  // namespace ica_lab
