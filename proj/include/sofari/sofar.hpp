#pragma once

#include <vector>

#include "sofari/core_model.hpp"

namespace sofari {

struct SofarConfig {
  int rank = 0;              // 0 selects the rank with estimate_rank
  double lambda = -1.0;      // < 0 uses lambda_c * sigma_mad * sqrt(log(pq)/n)
  double lambda_c = 0.7;
  int cv_folds = 0;          // > 1 picks lambda on a grid by K-fold prediction error
  int max_iter = 200;
  double tol = 1e-7;
  double threshold_floor = 1e-10;
  int max_rank = 10;         // cap for automatic rank selection
  double ratio_floor = 0.02;

  void validate() const;
};

struct SofarEstimate {
  SvdTriple triple;
  MatrixXd c_tilde;
  double lambda_u = 0.0, lambda_v = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;

  MatrixXd u() const { return triple.u(); }
  int r() const { return triple.r(); }
};

// Alternating sparse least squares with a final exact-SVD projection.
SofarEstimate fit_sofar(const RegressionData& data, const SofarConfig& cfg = {});

// Fit at a fixed penalty; the pilot machinery is skipped.
SofarEstimate fit_sofar_at(const RegressionData& data, int rank, double lambda, const SofarConfig& cfg);

// Wrap a known triple (e.g. the truth) as an estimate.
SofarEstimate estimate_from_triple(const SvdTriple& t);

int estimate_rank(const RegressionData& data, int max_rank, double ratio_floor = 0.02);

// 1.4826 * median absolute deviation of the ridge-pilot residual entries.
double pilot_noise_scale(const RegressionData& data);
double default_lambda(const RegressionData& data, double c = 1.0);

// (Sigma + 1e-6 tr(Sigma)/p I)^-1 n^-1 X'Y
MatrixXd ridge_pilot(const RegressionData& data);

}  // namespace sofari
