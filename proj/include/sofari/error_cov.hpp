#pragma once

#include "sofari/core_model.hpp"
#include "sofari/simulate.hpp"
#include "sofari/sofar.hpp"

namespace sofari {

struct ErrorCovEstimate {
  MatrixXd sigma;         // thresholded estimate
  double delta = 0.0;
  double kept_fraction = 1.0;  // off-diagonals surviving
  MatrixXd sample;        // unthresholded n^-1 E'E, used as a fallback
};

MatrixXd residuals(const RegressionData& data, const SofarEstimate& est);
MatrixXd residuals(const RegressionData& data, const MatrixXd& c);

ErrorCovEstimate adaptive_threshold_cov(const MatrixXd& e_hat, double delta = 2.0);

// True sigma^2 Sigma_E of a simulated instance.
ErrorCovEstimate oracle_error_cov(const SimInstance& sim);

}  // namespace sofari
