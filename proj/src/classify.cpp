#include "ica_lab/classify.hpp"

#include <algorithm>
#include <cmath>

#include "ica_lab/numerics.hpp"

namespace ica_lab {

std::string to_string(MapClass c) {
  switch (c) {
    case MapClass::Conformal:
      return "conformal";
    case MapClass::Oct:
      return "oct";
    case MapClass::VolumePreserving:
      return "volume_preserving";
  }
  return "?";
}

namespace {

using ResidualFn = std::function<double(const Eigen::MatrixXd&)>;

ClassReport run_classifier(MapClass tested, const SmoothMap& map,
                           const Eigen::MatrixXd& points, double tol,
                           const ResidualFn& residual_of) {
  if (points.rows() == 0) throw argument_error("classify: empty point set");
  if (points.cols() != map.dim())
    throw argument_error("classify: point dimension mismatch");
  if (!(tol > 0)) throw argument_error("classify: tolerance must be positive");

  ClassReport report;
  report.tested = tested;
  report.tol = tol;
  report.n_points = static_cast<int>(points.rows());
  report.residuals.assign(points.rows(), 0.0);

  parallel_for(static_cast<int>(points.rows()), [&](int i) {
    Eigen::MatrixXd jac = map.jacobian(points.row(i).transpose());
    report.residuals[i] = residual_of(jac);
  });

  std::vector<int> order(points.rows());
  for (int i = 0; i < static_cast<int>(points.rows()); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return report.residuals[a] > report.residuals[b];
  });
  report.max_residual = report.residuals[order.front()];
  const int keep = std::min<int>(5, static_cast<int>(order.size()));
  for (int k = 0; k < keep; ++k)
    report.worst.push_back({points.row(order[k]).transpose(),
                            report.residuals[order[k]]});
  report.pass = report.max_residual <= tol;
  return report;
}

}  // namespace

ClassReport classify_conformal(const SmoothMap& map, const Eigen::MatrixXd& points,
                               double tol) {
  return run_classifier(
      MapClass::Conformal, map, points, tol, [&](const Eigen::MatrixXd& jac) {
        Eigen::MatrixXd gram = jac.transpose() * jac;
        double lambda = gram.trace() / static_cast<double>(map.dim());
        gram.diagonal().array() -= lambda;
        return gram.cwiseAbs().maxCoeff() / std::max(1.0, lambda);
      });
}

ClassReport classify_oct(const SmoothMap& map, const Eigen::MatrixXd& points,
                         double tol) {
  return run_classifier(
      MapClass::Oct, map, points, tol, [](const Eigen::MatrixXd& jac) {
        Eigen::MatrixXd gram = jac.transpose() * jac;
        const int d = static_cast<int>(gram.rows());
        double worst = 0.0;
        for (int i = 0; i < d; ++i) {
          for (int j = i + 1; j < d; ++j) {
            double scale =
                std::sqrt(std::max(gram(i, i) * gram(j, j), 1e-300));
            worst = std::max(worst, std::abs(gram(i, j)) / scale);
          }
        }
        return worst;
      });
}

ClassReport classify_volume_preserving(const SmoothMap& map,
                                       const Eigen::MatrixXd& points,
                                       double tol) {
  return run_classifier(MapClass::VolumePreserving, map, points, tol,
                        [](const Eigen::MatrixXd& jac) {
                          return std::abs(det_small(jac) - 1.0);
                        });
}

}  // namespace ica_lab
