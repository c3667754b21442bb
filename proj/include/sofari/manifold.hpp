#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sofari/errors.hpp"

namespace sofari::sphere {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SpherePoint {
  VectorXd v;
  explicit SpherePoint(VectorXd x);  // throws ConstraintViolation unless |x| = 1 +- 1e-12
  static SpherePoint normalized(const VectorXd& x);
};

struct TangentVector {
  VectorXd base;
  VectorXd xi;
};

TangentVector tangent_project(const SpherePoint& v, const VectorXd& w);
SpherePoint exp_map(const SpherePoint& v, const TangentVector& xi);
TangentVector log_map(const SpherePoint& v, const SpherePoint& w);

// Q = diag(I - v_1 v_1', ..., I - v_r v_r', I_{extra}) acting on stacked
// vectors (v-blocks first, then an unconstrained tail of length `extra`).
class BlockProjector {
 public:
  BlockProjector(const std::vector<SpherePoint>& v_set, int extra);
  VectorXd apply(const VectorXd& stacked) const;
  MatrixXd dense() const;
  int dim() const { return dim_; }

 private:
  std::vector<VectorXd> v_;
  int extra_, dim_;
};

BlockProjector manifold_gradient_blocks(const std::vector<SpherePoint>& v_set, int extra = 0);

}  // namespace sofari::sphere
