#include "sofari/sofar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sofari/precision.hpp"

namespace sofari {

void SofarConfig::validate() const {
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  if (!(tol > 0)) throw InvalidArgument("tol must be positive");
  if (rank < 0) throw InvalidArgument("rank must be nonnegative (0 = auto)");
  if (!(threshold_floor >= 0)) throw InvalidArgument("threshold_floor must be nonnegative");
}

MatrixXd ridge_pilot(const RegressionData& data) {
  const MatrixXd& s = data.gram();
  const int p = data.p();
  const double jitter = 1e-6 * s.trace() / p;
  MatrixXd a = s + jitter * MatrixXd::Identity(p, p);
  return a.ldlt().solve(data.xty());
}

namespace {

double median(std::vector<double> v) {
  const size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

MatrixXd soft(const MatrixXd& a, double t) {
  return a.unaryExpr([t](double x) { return soft_threshold(x, t); });
}

MatrixXd polar(const MatrixXd& b) {
  Eigen::JacobiSVD<MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

struct Problem {
  const RegressionData& data;
  double lambda;
  double yy;  // (2n)^-1 |Y|^2

  // (2n)^-1 |Y - XUV'|^2 + lambda |U|_1 for orthonormal V, from cached products.
  double objective(const MatrixXd& u, const MatrixXd& v) const {
    const MatrixXd& s = data.gram();
    const double fit = 0.5 * (u.transpose() * s * u).trace() - (v.transpose() * data.xty().transpose() * u).trace();
    return yy + fit + lambda * u.cwiseAbs().sum();
  }
};

}  // namespace

double pilot_noise_scale(const RegressionData& data) {
  const MatrixXd resid = data.y() - data.x() * ridge_pilot(data);
  std::vector<double> e(resid.data(), resid.data() + resid.size());
  const double med = median(e);
  for (double& x : e) x = std::abs(x - med);
  return 1.4826 * median(e);
}

double default_lambda(const RegressionData& data, double c) {
  const double pq = static_cast<double>(data.p()) * data.q();
  return c * pilot_noise_scale(data) * std::sqrt(std::log(std::max(pq, 2.0)) / data.n());
}

SofarEstimate estimate_from_triple(const SvdTriple& t) {
  SofarEstimate e;
  e.triple = t;
  e.c_tilde = compose_coefficient(t);
  e.converged = true;
  return e;
}

SofarEstimate fit_sofar_at(const RegressionData& data, int r, double lambda, const SofarConfig& cfg) {
  cfg.validate();
  const int p = data.p(), q = data.q();
  if (r < 1 || r > std::min(p, q)) throw RankTooLarge("rank exceeds min(p, q)");
  if (lambda < 0) throw InvalidArgument("penalty must be nonnegative");
  const MatrixXd& s = data.gram();
  const MatrixXd& xty = data.xty();
  Problem prob{data, lambda, data.y().squaredNorm() / (2.0 * data.n())};

  // Initialization from the thresholded ridge pilot.
  SvdTriple t0 = svd_triple(soft(ridge_pilot(data), lambda), r);
  MatrixXd u = t0.u(), v = t0.v;

  SofarEstimate est;
  est.lambda_u = lambda;
  est.lambda_v = lambda;
  double f_prev = prob.objective(u, v);
  est.objective_trace.push_back(f_prev);

  Eigen::LDLT<MatrixXd> ls;
  if (lambda == 0) ls.compute(s);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    // U-step: one lasso per column against the projected responses.
    const MatrixXd cv = xty * v;
    if (lambda == 0) {
      u = ls.solve(cv);
    } else {
      for (int k = 0; k < r; ++k) {
        VectorXd warm = u.col(k);
        u.col(k) = lasso_gram(s, cv.col(k), lambda, &warm).coef;
      }
    }
    const double f_u = prob.objective(u, v);
    est.objective_trace.push_back(f_u);

    // V-step: thresholded polar candidate, guarded by the exact Procrustes solution.
    const MatrixXd b = xty.transpose() * u;  // n^-1 Y'XU
    MatrixXd v_new = polar(b);
    if (lambda > 0) {
      MatrixXd bt = b;
      for (int k = 0; k < r; ++k) {
        const double z = std::max(0.0, u.col(k).dot(s * u.col(k)));
        bt.col(k) = soft(b.col(k), lambda * std::sqrt(z));
      }
      if (bt.norm() > 0) {
        const MatrixXd cand = polar(bt);
        if (prob.objective(u, cand) <= f_u) v_new = cand;
      }
    }
    if (prob.objective(u, v_new) > f_u) v_new = v;  // never accept an increase
    v = v_new;
    const double f = prob.objective(u, v);
    est.objective_trace.push_back(f);
    est.iterations = it;
    const double dec = f_prev - f;
    if (f <= 0 || dec <= cfg.tol * std::max(std::abs(f_prev), std::numeric_limits<double>::min())) {
      est.converged = true;
      break;
    }
    f_prev = f;
  }

  // Exact SVD projection, sparsity floor on UD and VD, then project once more.
  SvdTriple t = svd_triple(u * v.transpose(), r);
  if (cfg.threshold_floor > 0) {
    MatrixXd a = t.l * t.d.asDiagonal();
    MatrixXd bb = t.v * t.d.asDiagonal();
    a = (a.array().abs() < cfg.threshold_floor).select(0.0, a);
    bb = (bb.array().abs() < cfg.threshold_floor).select(0.0, bb);
    const VectorXd dinv = t.d.unaryExpr([](double x) { return x > 0 ? 1.0 / x : 0.0; });
    t = svd_triple(a * dinv.asDiagonal() * bb.transpose(), r);
  }
  est.triple = t;
  est.c_tilde = compose_coefficient(t);
  return est;
}

namespace {

double cv_lambda(const RegressionData& data, int r, double base, const SofarConfig& cfg) {
  const int n = data.n(), folds = cfg.cv_folds;
  const std::vector<double> mult = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> err(mult.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, te;
    for (int i = 0; i < n; ++i) (i % folds == f ? te : tr).push_back(i);
    const RegressionData dtr = data.rows(tr), dte = data.rows(te);
    for (size_t m = 0; m < mult.size(); ++m) {
      const SofarEstimate e = fit_sofar_at(dtr, r, mult[m] * base, cfg);
      err[m] += (dte.y() - dte.x() * e.c_tilde).squaredNorm();
    }
  }
  return mult[std::min_element(err.begin(), err.end()) - err.begin()] * base;
}

}  // namespace

SofarEstimate fit_sofar(const RegressionData& data, const SofarConfig& cfg) {
  cfg.validate();
  int r = cfg.rank;
  if (r == 0) r = estimate_rank(data, std::min({cfg.max_rank, data.p(), data.q()}), cfg.ratio_floor);
  if (r > std::min(data.p(), data.q())) throw RankTooLarge("rank exceeds min(p, q)");
  double lambda = cfg.lambda;
  if (lambda < 0) {
    lambda = default_lambda(data, cfg.lambda_c);
    if (cfg.cv_folds > 1) lambda = cv_lambda(data, r, lambda, cfg);
  }
  return fit_sofar_at(data, r, lambda, cfg);
}

int estimate_rank(const RegressionData& data, int max_rank, double ratio_floor) {
  const int cap = std::max(1, std::min({max_rank, data.p(), data.q()}));
  // Light penalty: half the default level on the ridge pilot.
  const MatrixXd pilot = soft(ridge_pilot(data), 0.5 * default_lambda(data));
  Eigen::JacobiSVD<MatrixXd> svd(pilot);
  const VectorXd& sv = svd.singularValues();
  if (!(sv(0) > 0)) return 1;
  int r = 1;
  for (int k = 1; k < cap; ++k)
    if (sv(k) / sv(0) >= ratio_floor) r = k + 1;
  return r;
}

}  // namespace sofari
