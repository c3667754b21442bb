#pragma once

#include <optional>

#include "sofari/core_model.hpp"

namespace sofari {

struct LassoProblem {
  MatrixXd a;  // n x m
  VectorXd b;  // n
  double lambda = 0.0;
  int max_iter = 1000;
  double tol = 1e-8;
};

struct LassoResult {
  VectorXd coef;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;  // max KKT violation at exit
};

// Minimizes 0.5 g'Gg - c'g + lambda |g|_1 by cyclic coordinate descent.
// With G = a'a/n and c = a'b/n this is the usual (2n)^-1 |b - a g|^2 + lambda |g|_1.
// Coordinates with G_jj == 0 stay at zero.
LassoResult lasso_gram(const MatrixXd& g, const VectorXd& c, double lambda,
                       const VectorXd* warm = nullptr, int max_iter = 1000, double tol = 1e-8);

LassoResult lasso_cd(const LassoProblem& prob);

double soft_threshold(double x, double t);

struct NodewiseConfig {
  double c = 0.1;                      // lambda_j = c sqrt(log p / n) sd(X_j)
  std::optional<VectorXd> lambdas;     // per-node override
  int cv_folds = 0;                    // > 1 picks c per node from a grid by K-fold CV
  int s_max = 0;                       // > 0 keeps the s_max largest entries per row
  int workers = 1;
};

struct ApproxInverse {
  MatrixXd theta;
  double max_violation = 0.0;  // |I - Theta Sigma|_max
  int row_sparsity = 0;
  double row_norm_max = 0.0;   // max_j |theta_j|_2
  VectorXd lambdas;
  VectorXd tau2;
  bool converged = true;
};

struct InverseDiagnostics {
  double max_violation;
  int row_sparsity;
  double row_norm_max;
};

ApproxInverse nodewise_precision(const RegressionData& data, const NodewiseConfig& cfg = {});
InverseDiagnostics check_approximate_inverse(const MatrixXd& theta, const RegressionData& data);
InverseDiagnostics check_approximate_inverse(const MatrixXd& theta, const MatrixXd& gram);

}  // namespace sofari
