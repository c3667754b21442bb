#include "sofari/error_cov.hpp"

#include <cmath>

namespace sofari {

MatrixXd residuals(const RegressionData& data, const MatrixXd& c) {
  return data.y() - data.x() * c;
}

MatrixXd residuals(const RegressionData& data, const SofarEstimate& est) {
  return residuals(data, est.c_tilde);
}

ErrorCovEstimate adaptive_threshold_cov(const MatrixXd& e, double delta) {
  const int n = static_cast<int>(e.rows()), q = static_cast<int>(e.cols());
  if (n < 2) throw InvalidArgument("adaptive thresholding needs at least two rows");
  if (!(delta >= 0)) throw InvalidArgument("delta must be nonnegative");
  ErrorCovEstimate out;
  out.delta = delta;
  out.sample = e.transpose() * e / static_cast<double>(n);
  out.sample = 0.5 * (out.sample + out.sample.transpose());
  out.sigma = out.sample;
  const double lq = std::log(static_cast<double>(std::max(q, 2)));
  int kept = 0, total = 0;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) {
      const double sij = out.sample(i, j);
      const double theta = ((e.col(i).array() * e.col(j).array()) - sij).square().sum() / n;
      const bool keep = !(std::abs(sij) < delta * std::sqrt(theta * lq / n));
      if (!keep) out.sigma(i, j) = out.sigma(j, i) = 0.0;
      kept += keep;
      ++total;
    }
  out.kept_fraction = total ? static_cast<double>(kept) / total : 1.0;
  return out;
}

ErrorCovEstimate oracle_error_cov(const SimInstance& sim) {
  ErrorCovEstimate out;
  out.sigma = sim.sigma_e;
  out.sample = sim.sigma_e;
  return out;
}

}  // namespace sofari
