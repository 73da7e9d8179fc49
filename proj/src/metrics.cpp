#include "ica_lab/metrics.hpp"

#include <cmath>
#include <vector>

#include "ica_lab/numerics.hpp"

namespace ica_lab {

double c_oct_pointwise(const Eigen::MatrixXd& jacobian) {
  if (jacobian.rows() != jacobian.cols() || jacobian.rows() < 1)
    throw argument_error("c_oct_pointwise: Jacobian must be square");
  const int d = static_cast<int>(jacobian.cols());
  double col_log_sum = 0.0;
  for (int k = 0; k < d; ++k) {
    double norm = jacobian.col(k).norm();
    if (norm < 1e-150)
      throw singularity_error("c_oct_pointwise: vanishing Jacobian column");
    col_log_sum += std::log(norm);
  }
  double lad = log_abs_det(jacobian);
  if (!std::isfinite(lad))
    throw singularity_error("c_oct_pointwise: singular Jacobian");
  return col_log_sum - lad;
}

namespace {

MetricEstimate reduce_with_exclusions(std::vector<double>& vals,
                                      const std::vector<char>& ok,
                                      const MetricOptions& opts,
                                      const char* who) {
  const long n = static_cast<long>(vals.size());
  std::vector<double> kept;
  kept.reserve(vals.size());
  for (long i = 0; i < n; ++i)
    if (ok[i]) kept.push_back(vals[i]);
  MetricEstimate est;
  est.n_samples = static_cast<long>(kept.size());
  est.n_excluded = n - est.n_samples;
  if (est.n_excluded > opts.max_excluded_fraction * n || kept.empty())
    throw estimation_error(std::string(who) +
                           ": too many samples were excluded");
  MeanStderr ms = mean_and_stderr(kept);
  est.value = ms.mean;
  est.standard_error = ms.standard_error;
  return est;
}

}  // namespace

MetricEstimate c_oct(const SmoothMap& map, const SampleBatch& batch,
                     const MetricOptions& opts) {
  const int n = batch.size();
  if (n < 1) throw argument_error("c_oct: empty batch");
  if (batch.dim() != map.dim())
    throw argument_error("c_oct: batch dimension mismatch");
  std::vector<double> vals(n, 0.0);
  std::vector<char> ok(n, 0);
  parallel_for(n, [&](int i) {
    try {
      vals[i] = c_oct_pointwise(map.jacobian(batch.points.row(i).transpose()));
      ok[i] = 1;
    } catch (const domain_error&) {
    } catch (const singularity_error&) {
    }
  });
  return reduce_with_exclusions(vals, ok, opts, "c_oct");
}

MetricEstimate l1_recon(const SmoothMap& g_inv, const SmoothMap& f,
                        const SampleBatch& batch, const MetricOptions& opts) {
  const int n = batch.size();
  if (n < 1) throw argument_error("l1_recon: empty batch");
  if (batch.dim() != f.dim() || g_inv.dim() != f.dim())
    throw argument_error("l1_recon: dimension mismatch");
  std::vector<double> vals(n, 0.0);
  std::vector<char> ok(n, 0);
  parallel_for(n, [&](int i) {
    Eigen::VectorXd s = batch.points.row(i).transpose();
    try {
      Eigen::VectorXd rec = g_inv.evaluate(f.evaluate(s));
      double gap = (rec - s).norm();
      if (std::isfinite(gap)) {
        vals[i] = gap;
        ok[i] = 1;
      }
    } catch (const domain_error&) {
    } catch (const singularity_error&) {
    }
  });
  return reduce_with_exclusions(vals, ok, opts, "l1_recon");
}

MetricEstimate forward_kl(const TargetSampler& target, const LogDensityFn& model,
                          int n, RngStream& rng, const MetricOptions& opts) {
  if (n < 100) throw argument_error("forward_kl: need at least 100 samples");
  if (!target || !model) throw argument_error("forward_kl: missing callable");
  std::vector<double> vals(n, 0.0);
  std::vector<char> ok(n, 0);
  for (int i = 0; i < n; ++i) {
    auto [x, log_q] = target(rng);
    double log_p = model(x);
    double diff = log_q - log_p;
    if (std::isfinite(diff)) {
      vals[i] = diff;
      ok[i] = 1;
    }
  }
  return reduce_with_exclusions(vals, ok, opts, "forward_kl");
}

}  // namespace ica_lab
