#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sofari/core_model.hpp"
#include "sofari/error_cov.hpp"
#include "sofari/precision.hpp"
#include "sofari/sofar.hpp"

namespace sofari {

// Layer indices are 0-based throughout the C++ API.

struct LayerContext {
  int k = 0;
  Variant variant = Variant::Strong;
  double z_kk = 0.0;       // u_k' Sigma u_k
  MatrixXd m_k;            // p x q
  MatrixXd w_k;            // p x p
  MatrixXd c_other;        // C_{-k} (strong) or C^(2) (weak)
  MatrixXd u_other;        // U_{-k} or U^(2)
  MatrixXd c1_hat;         // first k layers (weak only; zero otherwise)
  double inner_condition = 1.0;
};

struct DebiasedLayer {
  int k = 0;
  VectorXd u_hat;
  double d2_hat = 0.0;
  VectorXd var_u;
  double var_d2 = 0.0;
  VectorXd score;
  LayerContext context;
  bool ok = true;
  bool used_fallback = false;  // variances recomputed with the unthresholded covariance
  std::string failure;
};

MatrixXd build_m_strong(const SofarEstimate& est, const RegressionData& data, int k);
MatrixXd build_w_strong(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k);
MatrixXd build_m_weak(const SofarEstimate& est, const RegressionData& data, int k);
MatrixXd build_w_weak(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k);

// Theta {I + z^-1 Sigma U (I - z^-1 U' Sigma U)^-1 U'}; `cond` receives the
// condition number of the inner matrix.
MatrixXd build_w(const MatrixXd& theta, const MatrixXd& gram, const MatrixXd& u_other, double z,
                 double* cond = nullptr);

// Split is treated as Strong here; the split pipeline chooses its inner variant.
LayerContext make_context(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data,
                          int k, Variant variant);

VectorXd score_strong(const SofarEstimate& est, const RegressionData& data, int k);
VectorXd score_weak(const SofarEstimate& est, const RegressionData& data, int k);
VectorXd score(const LayerContext& ctx, const SofarEstimate& est, const RegressionData& data);

VectorXd debias_u(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k,
                  Variant variant);
double debias_d2(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k,
                 Variant variant);

// Inner matrix of the variance quadratic forms:
// z M Se M' + (v' Se v) Sigma - 2 Sigma u v' Se M'.
MatrixXd variance_core(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                       const MatrixXd& sigma_e);
double variance_u(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                  const MatrixXd& sigma_e, const VectorXd& a);
double variance_d2(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                   const MatrixXd& sigma_e);

enum class VariantChoice { Strong, Weak, Split, Auto };

struct SofariConfig {
  VariantChoice variant = VariantChoice::Weak;
  Variant split_inner = Variant::Strong;  // M/W construction used inside the split variant
  SofarConfig sofar;
  NodewiseConfig nodewise;
  double delta = 2.0;
  std::uint64_t split_seed = 0;
  int workers = 1;
};

struct SofariResult {
  SofarEstimate estimate;
  ApproxInverse theta;
  ErrorCovEstimate sigma_e;
  Variant variant = Variant::Weak;
  std::vector<DebiasedLayer> layers;
  int n_used = 0;  // rows entering the debiasing step
  bool all_ok() const;
};

// Per-layer debiasing for a fixed (estimate, Theta, Sigma_e) bundle. Failures
// are recorded on the layer and do not abort the others.
std::vector<DebiasedLayer> debias_layers(const RegressionData& data, const SofarEstimate& est,
                                         const MatrixXd& theta, const ErrorCovEstimate& sigma_e,
                                         Variant variant, int workers = 1);

SofariResult run_sofari(const RegressionData& data, const SofariConfig& cfg = {});

// Fold 2 fits the initial estimate; fold 1 supplies Sigma, Theta, Y and the residual covariance.
SofariResult run_sofari_folds(const RegressionData& fold1, const RegressionData& fold2, const SofariConfig& cfg);

// Even split under a seeded permutation; with odd n the last permuted row is dropped.
SofariResult run_sofari_split(const RegressionData& data, const SofariConfig& cfg = {});
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, std::uint64_t seed);

struct OrthogonalityReport {
  VectorXd strong;    // sum_{j != k} |l_j' Sigma l_k|
  VectorXd weak;      // sum_{j > k} (d_j^2 / d_k) |l_j' Sigma l_k|
  VectorXd eigengap;  // d_k^2 - d_{k+1}^2, r-1 entries
  double threshold = 0.0;  // 1 / sqrt(n)
  Variant recommended = Variant::Weak;
};

OrthogonalityReport diagnose_orthogonality(const SvdTriple& t, const RegressionData& data);

std::string variant_name(Variant v);

}  // namespace sofari
