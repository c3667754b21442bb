#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>

#include "sofari/errors.hpp"

namespace sofari {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Design and responses with a lazily computed, write-once Gram cache.
// Copies share the cache, so a copied object never recomputes.
class RegressionData {
 public:
  RegressionData() = default;
  RegressionData(MatrixXd x, MatrixXd y);

  const MatrixXd& x() const { return x_; }
  const MatrixXd& y() const { return y_; }
  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  int q() const { return static_cast<int>(y_.cols()); }

  const MatrixXd& gram() const;  // n^-1 X'X
  const MatrixXd& xty() const;   // n^-1 X'Y

  // Row subset, in the given order. The new object has its own cache.
  RegressionData rows(const std::vector<int>& idx) const;

 private:
  struct Cache {
    std::once_flag gram_once, xty_once;
    MatrixXd gram, xty;
  };
  MatrixXd x_, y_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

struct SvdTriple {
  MatrixXd l;  // p x r
  VectorXd d;  // r
  MatrixXd v;  // q x r

  int r() const { return static_cast<int>(d.size()); }
  int p() const { return static_cast<int>(l.rows()); }
  int q() const { return static_cast<int>(v.rows()); }
  MatrixXd u() const { return l * d.asDiagonal(); }

  // Throws ConstraintViolation when orthonormality, ordering or positivity fail.
  void validate(double orth_tol = 1e-10, double gap_tol = 1e-12) const;
};

// Flip (l_k, v_k) jointly so the largest-magnitude entry of each v_k is positive.
void canonicalize_signs(SvdTriple& t);

// Thin SVD of c truncated to rank r, sign-canonicalized.
SvdTriple svd_triple(const MatrixXd& c, int r);

MatrixXd compose_coefficient(const SvdTriple& t);

enum class Variant { Strong, Weak, Split };

// Nuisance parameters for layer k (0-based). Strong: every other u and all v.
// Weak: u_i, v_i for i >= k, with the first k layers frozen into c1_hat.
struct NuisanceView {
  int k = 0;
  Variant variant = Variant::Strong;
  MatrixXd u_other;  // Strong: r-1 columns; Weak: r-k-1 columns (i > k)
  MatrixXd v_other;  // Strong: r columns; Weak: r-k columns (i >= k)
  MatrixXd c1_hat;   // p x q, zero for k == 0 or Strong
};

NuisanceView make_view(const MatrixXd& u, const MatrixXd& v, int k, Variant variant);

// (2n)^-1 ||Y - X U V'||_F^2. Columns of v must be orthonormal to 1e-8.
double loss(const RegressionData& data, const MatrixXd& u, const MatrixXd& v);

VectorXd grad_u(const RegressionData& data, const MatrixXd& u, const MatrixXd& v, int k);
VectorXd grad_v(const RegressionData& data, const MatrixXd& u, const MatrixXd& v, int k);
VectorXd grad_u_peeled(const RegressionData& data, const NuisanceView& view, const MatrixXd& u,
                       const MatrixXd& v, int k);
VectorXd grad_v_peeled(const RegressionData& data, const NuisanceView& view, const MatrixXd& u,
                       const MatrixXd& v, int k);

// Orthonormality check shared by the loss and its gradients.
void check_orthonormal(const MatrixXd& v, double tol, const char* what);

}  // namespace sofari
