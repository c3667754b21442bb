#include "sofari/precision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace sofari {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

namespace {

double kkt_violation(const MatrixXd& g, const VectorXd& c, const VectorXd& beta, double lambda) {
  const VectorXd grad = c - g * beta;  // stationarity: grad_j = lambda sign(beta_j) on the support
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (g(j, j) <= 0) continue;
    const double v = beta(j) != 0.0 ? std::abs(grad(j) - lambda * (beta(j) > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(grad(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

LassoResult lasso_gram(const MatrixXd& g, const VectorXd& c, double lambda, const VectorXd* warm,
                       int max_iter, double tol) {
  const Eigen::Index m = c.size();
  if (g.rows() != m || g.cols() != m) throw InvalidArgument("lasso: Gram/cross-product size mismatch");
  if (lambda < 0) throw InvalidArgument("lasso: negative penalty");
  LassoResult res;
  res.coef = warm ? *warm : VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j)
    if (g(j, j) <= 0) res.coef(j) = 0.0;
  VectorXd resid = c - g * res.coef;  // c - G beta, updated incrementally
  const double kkt_tol = 1e-6 * lambda + 1e-12 * (1.0 + c.cwiseAbs().maxCoeff());

  for (int it = 1; it <= max_iter; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double gjj = g(j, j);
      if (gjj <= 0) continue;
      const double old = res.coef(j);
      const double nw = soft_threshold(resid(j) + gjj * old, lambda) / gjj;
      if (nw != old) {
        resid.noalias() -= g.col(j) * (nw - old);
        res.coef(j) = nw;
        max_change = std::max(max_change, std::abs(nw - old));
      }
    }
    res.iterations = it;
    if (max_change < tol) {
      // Refresh the incremental residual before certifying the exit.
      resid = c - g * res.coef;
      res.kkt_residual = kkt_violation(g, c, res.coef, lambda);
      if (res.kkt_residual <= kkt_tol) {
        res.converged = true;
        return res;
      }
    }
  }
  res.kkt_residual = kkt_violation(g, c, res.coef, lambda);
  res.converged = res.kkt_residual <= kkt_tol;
  return res;
}

LassoResult lasso_cd(const LassoProblem& prob) {
  const double n = static_cast<double>(prob.a.rows());
  if (prob.b.size() != prob.a.rows()) throw InvalidArgument("lasso: a and b row counts differ");
  const MatrixXd g = prob.a.transpose() * prob.a / n;
  const VectorXd c = prob.a.transpose() * prob.b / n;
  return lasso_gram(g, c, prob.lambda, nullptr, prob.max_iter, prob.tol);
}

namespace {

MatrixXd drop_index(const MatrixXd& s, int j) {
  const int p = static_cast<int>(s.rows());
  MatrixXd out(p - 1, p - 1);
  for (int a = 0, ia = 0; a < p; ++a) {
    if (a == j) continue;
    for (int b = 0, ib = 0; b < p; ++b) {
      if (b == j) continue;
      out(ia, ib++) = s(a, b);
    }
    ++ia;
  }
  return out;
}

VectorXd drop_entry(const VectorXd& v, int j) {
  VectorXd out(v.size() - 1);
  for (Eigen::Index a = 0, ia = 0; a < v.size(); ++a)
    if (a != j) out(ia++) = v(a);
  return out;
}

double column_sd(const MatrixXd& x, int j) {
  const double mu = x.col(j).mean();
  const double n = static_cast<double>(x.rows());
  return std::sqrt((x.col(j).array() - mu).square().sum() / std::max(1.0, n - 1.0));
}

// Held-out squared error of the node-j regression for each candidate penalty.
double cv_pick(const MatrixXd& x, int j, const std::vector<double>& grid, int folds) {
  const int n = static_cast<int>(x.rows());
  std::vector<double> err(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, te;
    for (int i = 0; i < n; ++i) (i % folds == f ? te : tr).push_back(i);
    MatrixXd xt(tr.size(), x.cols()), xv(te.size(), x.cols());
    for (size_t i = 0; i < tr.size(); ++i) xt.row(i) = x.row(tr[i]);
    for (size_t i = 0; i < te.size(); ++i) xv.row(i) = x.row(te[i]);
    const MatrixXd s = xt.transpose() * xt / static_cast<double>(tr.size());
    const MatrixXd g = drop_index(s, j);
    const VectorXd c = drop_entry(s.col(j), j);
    MatrixXd xv_rest(xv.rows(), x.cols() - 1);
    for (int a = 0, ia = 0; a < x.cols(); ++a)
      if (a != j) xv_rest.col(ia++) = xv.col(a);
    VectorXd warm = VectorXd::Zero(c.size());
    // Largest penalty first so each solve warm-starts from a sparser fit.
    std::vector<size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return grid[a] > grid[b]; });
    for (size_t gi : order) {
      LassoResult lr = lasso_gram(g, c, grid[gi], &warm);
      warm = lr.coef;
      err[gi] += (xv.col(j) - xv_rest * lr.coef).squaredNorm();
    }
  }
  return grid[std::min_element(err.begin(), err.end()) - err.begin()];
}

}  // namespace

InverseDiagnostics check_approximate_inverse(const MatrixXd& theta, const MatrixXd& gram) {
  const int p = static_cast<int>(gram.rows());
  InverseDiagnostics d{};
  d.max_violation = (MatrixXd::Identity(p, p) - theta * gram).cwiseAbs().maxCoeff();
  d.row_sparsity = 0;
  d.row_norm_max = 0.0;
  for (int j = 0; j < p; ++j) {
    d.row_sparsity = std::max<int>(d.row_sparsity, static_cast<int>((theta.row(j).array() != 0.0).count()));
    d.row_norm_max = std::max(d.row_norm_max, theta.row(j).norm());
  }
  return d;
}

InverseDiagnostics check_approximate_inverse(const MatrixXd& theta, const RegressionData& data) {
  return check_approximate_inverse(theta, data.gram());
}

ApproxInverse nodewise_precision(const RegressionData& data, const NodewiseConfig& cfg) {
  const int p = data.p(), n = data.n();
  if (p < 2) throw InvalidArgument("nodewise precision needs p >= 2");
  if (cfg.lambdas && cfg.lambdas->size() != p) throw InvalidArgument("per-node penalty vector has wrong length");
  const MatrixXd& s = data.gram();
  const double rate = std::sqrt(std::log(static_cast<double>(p)) / n);

  ApproxInverse out;
  out.theta = MatrixXd::Zero(p, p);
  out.lambdas.resize(p);
  out.tau2.resize(p);
  std::vector<char> ok(p, 1), degenerate(p, 0);

  auto node = [&](int j) {
    double lam;
    if (cfg.lambdas) {
      lam = (*cfg.lambdas)(j);
    } else if (cfg.cv_folds > 1) {
      const double base = rate * column_sd(data.x(), j);
      std::vector<double> grid;
      for (double m : {0.1, 0.25, 0.5, 1.0, 2.0}) grid.push_back(m * base);
      lam = cv_pick(data.x(), j, grid, cfg.cv_folds);
    } else {
      lam = cfg.c * rate * column_sd(data.x(), j);
    }
    const MatrixXd g = drop_index(s, j);
    const VectorXd c = drop_entry(s.col(j), j);
    const LassoResult lr = lasso_gram(g, c, lam);
    ok[j] = lr.converged;
    const double tau2 = s(j, j) - c.dot(lr.coef);  // n^-1 X_j'(X_j - X_-j gamma)
    out.lambdas(j) = lam;
    out.tau2(j) = tau2;
    if (!(tau2 > 1e-12)) {
      degenerate[j] = 1;
      return;
    }
    for (int a = 0, ia = 0; a < p; ++a)
      out.theta(j, a) = (a == j ? 1.0 : -lr.coef(ia++)) / tau2;
  };

  const int workers = std::max(1, std::min(cfg.workers, p));
  if (workers == 1) {
    for (int j = 0; j < p; ++j) node(j);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int j = w; j < p; j += workers) node(j);
      });
    for (auto& t : pool) t.join();
  }
  for (int j = 0; j < p; ++j)
    if (degenerate[j])
      throw DegenerateColumn("column " + std::to_string(j + 1) + " is collinear with the others");
  out.converged = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });

  if (cfg.s_max > 0) {
    for (int j = 0; j < p; ++j) {
      std::vector<int> idx(p);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if ((a == j) != (b == j)) return a == j;  // the diagonal is always kept
        return std::abs(out.theta(j, a)) > std::abs(out.theta(j, b));
      });
      for (int i = cfg.s_max; i < p; ++i) out.theta(j, idx[i]) = 0.0;
    }
  }
  const InverseDiagnostics d = check_approximate_inverse(out.theta, s);
  out.max_violation = d.max_violation;
  out.row_sparsity = d.row_sparsity;
  out.row_norm_max = d.row_norm_max;
  return out;
}

}  // namespace sofari
