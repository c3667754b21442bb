#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"

using namespace sofari;
using namespace sofari::sphere;
using namespace testing_support;

TEST_CASE("sphere points require unit norm") {
  CHECK_NOTHROW(SpherePoint(VectorXd::Unit(3, 0)));
  CHECK_THROWS_AS(SpherePoint(VectorXd::Constant(3, 1.0)), ConstraintViolation);
  CHECK_THROWS_AS(SpherePoint::normalized(VectorXd::Zero(3)), ConstraintViolation);
  CHECK(std::abs(SpherePoint::normalized(VectorXd::Constant(4, 2.0)).v.norm() - 1.0) <= 1e-15);
}

TEST_CASE("tangent projection") {
  CounterRng g(1, 0);
  SpherePoint v = SpherePoint::normalized(gaussian(g, 3, 1).col(0));
  CHECK(tangent_project(v, v.v).xi.norm() <= 1e-15);
  VectorXd w = gaussian(g, 3, 1).col(0);
  w -= v.v * v.v.dot(w);
  CHECK(max_abs(tangent_project(v, w).xi - w) <= 1e-15);
  VectorXd x = gaussian(g, 3, 1).col(0);
  TangentVector t = tangent_project(v, x);
  CHECK(max_abs(t.xi - (x - v.v.dot(x) * v.v)) <= 1e-15);
  CHECK(std::abs(v.v.dot(t.xi)) <= 1e-15);
}

TEST_CASE("exp map: zero, antipode and geodesic ODE") {
  CounterRng g(2, 0);
  SpherePoint v = SpherePoint::normalized(gaussian(g, 5, 1).col(0));
  CHECK(max_abs(exp_map(v, {v.v, VectorXd::Zero(5)}).v - v.v) == 0.0);
  CHECK(max_abs(exp_map(v, {v.v, VectorXd::Constant(5, 1e-14)}).v - v.v) == 0.0);
  for (int i = 0; i < 5; ++i) {
    TangentVector t = tangent_project(v, gaussian(g, 5, 1).col(0));
    t.xi *= M_PI / t.xi.norm();
    SpherePoint a = exp_map(v, t);
    CHECK(max_abs(a.v + v.v) <= 1e-12);
    CHECK(std::abs(a.v.norm() - 1.0) <= 1e-12);
  }
  for (int i = 0; i < 20; ++i) {
    TangentVector t = tangent_project(v, gaussian(g, 5, 1).col(0));
    t.xi *= g.uniform(0.1, 3.0) / t.xi.norm();
    SpherePoint e = exp_map(v, t);
    CHECK(std::abs(e.v.norm() - 1.0) <= 1e-12);
    CHECK(max_abs(e.v - rk4_geodesic(v.v, t.xi)) <= 1e-9);
  }
}

TEST_CASE("log map: identity, arclength, antipodal error") {
  CounterRng g(3, 0);
  SpherePoint v = SpherePoint::normalized(gaussian(g, 4, 1).col(0));
  CHECK(log_map(v, v).xi.norm() == 0.0);
  CHECK_THROWS_AS(log_map(v, SpherePoint(-v.v)), AntipodalPoint);
  SpherePoint w = SpherePoint::normalized(gaussian(g, 4, 1).col(0));
  const double theta = std::acos(std::clamp(v.v.dot(w.v), -1.0, 1.0));
  TangentVector xi = log_map(v, w);
  CHECK(std::abs(xi.xi.norm() - theta) <= 1e-12);
  // Literal formula (w - v cos theta) theta / sin theta away from the endpoints.
  CHECK(max_abs(xi.xi - (w.v - v.v * std::cos(theta)) * theta / std::sin(theta)) <= 1e-12);
}

TEST_CASE("exp/log round trips, tangency and unit norm over 1000 pairs") {
  ManifoldErrors e = manifold_suite(1000);
  CHECK(e.roundtrip <= 1e-10);
  CHECK(e.log_exp <= 1e-10);
  CHECK(e.tangency <= 1e-12);
  CHECK(e.unit_norm <= 1e-12);
  CHECK(e.arclength <= 1e-12);
}

TEST_CASE("block projector") {
  CounterRng g(4, 0);
  std::vector<SpherePoint> vs;
  for (int q : {3, 5, 4}) vs.push_back(SpherePoint::normalized(gaussian(g, q, 1).col(0)));
  BlockProjector proj = manifold_gradient_blocks(vs, 6);
  CHECK(proj.dim() == 18);
  VectorXd x = gaussian(g, 18, 1).col(0);
  const VectorXd once = proj.apply(x);
  CHECK(max_abs(proj.apply(once) - once) <= 1e-12);

  VectorXd stacked = VectorXd::Zero(18);
  stacked << vs[0].v, vs[1].v, vs[2].v, VectorXd::Zero(6);
  CHECK(proj.apply(stacked).norm() <= 1e-12);

  VectorXd oracle(18);
  int off = 0;
  for (const auto& v : vs) {
    oracle.segment(off, v.v.size()) = tangent_project(v, x.segment(off, v.v.size())).xi;
    off += v.v.size();
  }
  oracle.tail(6) = x.tail(6);
  CHECK(max_abs(once - oracle) <= 1e-14);
  CHECK(max_abs(proj.dense() * x - once) <= 1e-12);
  CHECK_THROWS_AS(proj.apply(VectorXd::Zero(17)), InvalidArgument);
}
