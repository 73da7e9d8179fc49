#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ica_lab/rng.hpp"
#include "ica_lab/smooth_map.hpp"

namespace ica_lab {

/// Monte Carlo estimate with its sampling error and exclusion accounting.
struct MetricEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  long n_samples = 0;
  long n_excluded = 0;
};

/// A batch of evaluation points (rows), optionally with their sampling
/// log-densities.
struct SampleBatch {
  Eigen::MatrixXd points;
  Eigen::VectorXd log_density;  // empty when unknown

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

/// Column-orthogonality defect of one Jacobian:
///   sum_k log |column_k| - log |det J|.
/// Nonnegative for every invertible J; zero exactly when the columns are
/// orthogonal.  Throws singularity_error for singular J or vanishing columns.
double c_oct_pointwise(const Eigen::MatrixXd& jacobian);

struct MetricOptions {
  double max_excluded_fraction = 0.01;
};

/// Mean column-orthogonality defect of `map` over the batch.  Points whose
/// Jacobian evaluation fails (outside the domain, singular) are excluded;
/// more than max_excluded_fraction of them aborts with estimation_error.
MetricEstimate c_oct(const SmoothMap& map, const SampleBatch& batch,
                     const MetricOptions& opts = {});

/// Mean Euclidean reconstruction gap  E | g_inv(f(s)) - s |  over latent
/// points s in the batch.
MetricEstimate l1_recon(const SmoothMap& g_inv, const SmoothMap& f,
                        const SampleBatch& batch, const MetricOptions& opts = {});

/// Forward Kullback-Leibler divergence  E_q[ log q(x) - log p(x) ]  estimated
/// from n draws of the target sampler (which returns a point and its exact
/// log-density under q).  Requires n >= 100.
using TargetSampler =
    std::function<std::pair<Eigen::VectorXd, double>(RngStream&)>;
using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;

MetricEstimate forward_kl(const TargetSampler& target, const LogDensityFn& model,
                          int n, RngStream& rng, const MetricOptions& opts = {});

}  // namespace ica_lab
