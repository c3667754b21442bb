#include "sofari/manifold.hpp"

#include <algorithm>
#include <cmath>

namespace sofari::sphere {

namespace {
constexpr double kSmallAngle = 1e-12;
}

SpherePoint::SpherePoint(VectorXd x) : v(std::move(x)) {
  if (!(std::abs(v.norm() - 1.0) <= 1e-12)) throw ConstraintViolation("sphere point is not unit norm");
}

SpherePoint SpherePoint::normalized(const VectorXd& x) {
  const double nx = x.norm();
  if (!(nx > 0)) throw ConstraintViolation("cannot normalize zero vector");
  return SpherePoint(x / nx);
}

TangentVector tangent_project(const SpherePoint& v, const VectorXd& w) {
  return {v.v, w - v.v * v.v.dot(w)};
}

SpherePoint exp_map(const SpherePoint& v, const TangentVector& xi) {
  const double t = xi.xi.norm();
  if (t < kSmallAngle) return v;
  VectorXd w = v.v * std::cos(t) + xi.xi * (std::sin(t) / t);
  // Renormalize away rounding; the formula is exactly unit norm in exact arithmetic.
  w /= w.norm();
  return SpherePoint(std::move(w));
}

TangentVector log_map(const SpherePoint& v, const SpherePoint& w) {
  const double c = std::clamp(v.v.dot(w.v), -1.0, 1.0);
  // arccos loses accuracy near 0 and pi; atan2 of the orthogonal part is stable.
  const VectorXd perp = w.v - v.v * c;
  const double theta = std::atan2(perp.norm(), c);
  if (theta >= M_PI - 1e-8) throw AntipodalPoint("log map undefined at antipodal point");
  if (theta < kSmallAngle) return {v.v, VectorXd::Zero(v.v.size())};
  return {v.v, perp * (theta / perp.norm())};
}

BlockProjector::BlockProjector(const std::vector<SpherePoint>& v_set, int extra) : extra_(extra) {
  dim_ = extra;
  for (const auto& p : v_set) {
    v_.push_back(p.v);
    dim_ += static_cast<int>(p.v.size());
  }
}

VectorXd BlockProjector::apply(const VectorXd& stacked) const {
  if (stacked.size() != dim_) throw InvalidArgument("stacked vector has wrong length");
  VectorXd out = stacked;
  int off = 0;
  for (const auto& v : v_) {
    auto seg = out.segment(off, v.size());
    seg -= v * v.dot(seg);
    off += static_cast<int>(v.size());
  }
  return out;
}

MatrixXd BlockProjector::dense() const {
  MatrixXd q = MatrixXd::Identity(dim_, dim_);
  int off = 0;
  for (const auto& v : v_) {
    q.block(off, off, v.size(), v.size()) -= v * v.transpose();
    off += static_cast<int>(v.size());
  }
  return q;
}

BlockProjector manifold_gradient_blocks(const std::vector<SpherePoint>& v_set, int extra) {
  return BlockProjector(v_set, extra);
}

}  // namespace sofari::sphere
