#include "sofari/simulate.hpp"

#include <cmath>

#include "sofari/rng.hpp"

namespace sofari {

namespace {

enum Stream : std::uint64_t { kTruth = 0, kDesign = 1, kNoise = 2 };

double draw_sign(CounterRng& g) { return g.uniform() < 0.5 ? -1.0 : 1.0; }

// Uniform on [-hi, -lo] U [lo, hi]; the two pieces have equal length.
double draw_two_sided(CounterRng& g, double lo, double hi) {
  const double s = draw_sign(g);
  return s * g.uniform(lo, hi);
}

MatrixXd standard_normal(CounterRng& g, int rows, int cols) {
  MatrixXd z(rows, cols);
  // Row-major fill so the stream layout does not depend on storage order.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) z(i, j) = g.normal();
  return z;
}

MatrixXd chol_lower(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw RankDeficiency("covariance not positive definite");
  return llt.matrixL();
}

}  // namespace

void SimSetting::validate() const {
  if (n < 1 || p < 1 || q < 1 || r < 1) throw InvalidArgument("n, p, q, r must be positive");
  if (d_star.size() != r) throw InvalidArgument("d_star length must equal r");
  for (int k = 0; k < r; ++k) {
    if (!(d_star(k) > 0)) throw InvalidArgument("d_star must be positive");
    if (k + 1 < r && !(d_star(k) > d_star(k + 1))) throw InvalidArgument("d_star must be strictly decreasing");
  }
  if (s1 < 1 || s2 < 1) throw InvalidArgument("support sizes must be positive");
  if (!(std::abs(rho_x) < 1) || !(std::abs(rho_e) < 1)) throw InvalidArgument("|rho| must be below 1");
  if (!(snr > 0)) throw InvalidArgument("snr must be positive");
  if (design == Design::WeaklySparse) {
    if (r != 3) throw InvalidArgument("weakly sparse layout is defined for r = 3");
    if (p < 50 || q < 30) throw SupportOverflow("weakly sparse layout needs p >= 50 and q >= 30");
  } else if (r * s1 > p || r * s2 > q) {
    throw SupportOverflow("layer supports exceed the dimensions");
  }
}

SimSetting preset(int id) {
  SimSetting s;
  switch (id) {
    case 1: break;
    case 2: s.p = 50; s.q = 30; break;
    case 3:
      s.design = Design::IidGaussian;
      s.d_star << 200, 15, 5;
      s.s1 = s.s2 = 5;
      break;
    case 4:
      s.design = Design::IidGaussian;
      s.p = 50; s.q = 30;
      s.d_star << 200, 15, 5;
      s.s1 = s.s2 = 5;
      break;
    case 5:
      s.design = Design::WeaklySparse;
      s.p = 50; s.q = 30;
      s.d_star << 200, 15, 5;
      s.s1 = 20; s.s2 = 11;
      break;
    default: throw InvalidArgument("unknown setting " + std::to_string(id));
  }
  return s;
}

std::string design_name(Design d) {
  switch (d) {
    case Design::WeakOrth: return "weak_orth";
    case Design::IidGaussian: return "iid_gaussian";
    case Design::WeaklySparse: return "weakly_sparse";
  }
  return "";
}

Design parse_design(const std::string& s) {
  if (s == "weak_orth") return Design::WeakOrth;
  if (s == "iid_gaussian") return Design::IidGaussian;
  if (s == "weakly_sparse") return Design::WeaklySparse;
  throw InvalidArgument("unknown design '" + s + "'");
}

MatrixXd ar1_cov(int m, double rho) {
  MatrixXd s(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  return s;
}

SvdTriple gen_truth(const SimSetting& s) {
  s.validate();
  CounterRng g(s.seed, kTruth);
  MatrixXd l = MatrixXd::Zero(s.p, s.r), v = MatrixXd::Zero(s.q, s.r);

  if (s.design == Design::WeaklySparse) {
    // (offset, count, kind) runs; kind 0 = {-1,1}, 1 = weak [.01,.1], 2 = moderate [.6,1].
    struct Run { int off, len, kind; };
    const std::vector<std::vector<Run>> lrun = {
        {{0, 8, 0}, {38, 12, 1}}, {{4, 12, 1}, {16, 8, 0}}, {{20, 12, 1}, {32, 8, 0}}};
    const std::vector<std::vector<Run>> vrun = {
        {{0, 8, 2}, {27, 3, 1}}, {{6, 3, 1}, {9, 8, 2}}, {{19, 8, 2}, {27, 3, 1}}};
    auto fill = [&g](Eigen::Ref<VectorXd> col, const std::vector<Run>& runs) {
      for (const auto& run : runs)
        for (int i = 0; i < run.len; ++i) {
          double x = 0;
          if (run.kind == 0) x = draw_sign(g);
          else if (run.kind == 1) x = draw_two_sided(g, 0.01, 0.1);
          else x = draw_two_sided(g, 0.6, 1.0);
          col(run.off + i) = x;
        }
    };
    for (int k = 0; k < 3; ++k) fill(l.col(k), lrun[k]);
    for (int k = 0; k < 3; ++k) fill(v.col(k), vrun[k]);
  } else {
    for (int k = 0; k < s.r; ++k)
      for (int i = 0; i < s.s1; ++i) l(k * s.s1 + i, k) = draw_sign(g);
    for (int k = 0; k < s.r; ++k)
      for (int i = 0; i < s.s2; ++i) v(k * s.s2 + i, k) = draw_two_sided(g, 0.3, 1.0);
  }
  l.colwise().normalize();
  v.colwise().normalize();
  const MatrixXd c = l * s.d_star.asDiagonal() * v.transpose();
  SvdTriple t = svd_triple(c, s.r);
  // Exact zeros off the union support survive the projection only up to rounding.
  t.l = (t.l.array().abs() < 1e-14).select(0.0, t.l);
  t.v = (t.v.array().abs() < 1e-14).select(0.0, t.v);
  return t;
}

MatrixXd gen_design(const SimSetting& s, const SvdTriple& truth) {
  CounterRng g(s.seed, kDesign);
  const MatrixXd sx = ar1_cov(s.p, s.rho_x);
  if (s.design != Design::WeakOrth) return standard_normal(g, s.n, s.p) * chol_lower(sx).transpose();

  const int p = s.p, r = truth.r();
  const MatrixXd& l = truth.l;
  // Orthonormal complement from the full Householder basis of L.
  Eigen::HouseholderQR<MatrixXd> qr(l);
  const MatrixXd qfull = qr.householderQ() * MatrixXd::Identity(p, p);
  const MatrixXd lperp = qfull.rightCols(p - r);
  MatrixXd pm(p, p);
  pm << l, lperp;
  Eigen::JacobiSVD<MatrixXd> psvd(pm);
  const double cond = psvd.singularValues()(0) / psvd.singularValues()(p - 1);
  if (!(cond < 1e12)) throw RankDeficiency("basis [L, L_perp] is numerically singular");

  const MatrixXd x1 = standard_normal(g, s.n, r);
  MatrixXd x2(s.n, p - r);
  if (p > r) {
    const MatrixXd s11 = l.transpose() * sx * l;
    const MatrixXd s21 = lperp.transpose() * sx * l;
    const MatrixXd s22 = lperp.transpose() * sx * lperp;
    const Eigen::LLT<MatrixXd> s11f(s11);
    const MatrixXd b = s11f.solve(s21.transpose()).transpose();  // S21 S11^-1
    MatrixXd schur = s22 - b * s21.transpose();
    schur = 0.5 * (schur + schur.transpose());
    const MatrixXd z = standard_normal(g, s.n, p - r);
    x2 = x1 * b.transpose() + z * chol_lower(schur).transpose();
  }
  MatrixXd xz(s.n, p);
  xz << x1, x2;
  // X P = [X1, X2]  <=>  P' X' = [X1, X2]'
  return pm.transpose().fullPivLu().solve(xz.transpose()).transpose();
}

NoiseDraw gen_noise(const SimSetting& s, const SvdTriple& truth, const MatrixXd& x) {
  CounterRng g(s.seed, kNoise);
  const int r = truth.r();
  const MatrixXd e0 = standard_normal(g, s.n, s.q) * chol_lower(ar1_cov(s.q, s.rho_e)).transpose();
  const double signal = (x * truth.l.col(r - 1)).norm() * truth.d(r - 1) * truth.v.col(r - 1).norm();
  const double scale = signal / (s.snr * e0.norm());
  return {scale * e0, scale * scale};
}

SimInstance gen_instance_with_truth(const SimSetting& s0, const SvdTriple& truth,
                                    std::uint64_t data_seed) {
  SimSetting s = s0;
  s.seed = data_seed;
  MatrixXd x = gen_design(s, truth);
  NoiseDraw nd = gen_noise(s, truth, x);
  MatrixXd y = x * compose_coefficient(truth) + nd.e;
  SimInstance inst{RegressionData(std::move(x), std::move(y)), truth,
                   nd.sigma2 * ar1_cov(s.q, s.rho_e), nd.sigma2, std::move(nd.e)};
  return inst;
}

SimInstance gen_instance(const SimSetting& s) {
  return gen_instance_with_truth(s, gen_truth(s), s.seed);
}

std::vector<std::vector<int>> tabulated_components(const SimSetting& s) {
  std::vector<std::vector<int>> out(s.r);
  if (s.design == Design::WeaklySparse) {
    auto range = [](int a, int len) {
      std::vector<int> v;
      for (int i = 0; i < len; ++i) v.push_back(a + i);
      return v;
    };
    const std::vector<std::pair<int, int>> strong = {{0, 8}, {16, 8}, {32, 8}};
    const std::vector<std::pair<int, int>> weak = {{38, 12}, {4, 12}, {20, 12}};
    for (int k = 0; k < 3; ++k) {
      out[k] = range(strong[k].first, strong[k].second);
      auto w = range(weak[k].first, weak[k].second);
      out[k].insert(out[k].end(), w.begin(), w.end());
    }
    return out;
  }
  const int m = s.s1;
  for (int k = 0; k < s.r; ++k) {
    for (int i = 0; i < m; ++i) out[k].push_back(k * m + i);
    for (int i = m; i >= 1; --i) out[k].push_back(s.p - i);
  }
  return out;
}

}  // namespace sofari
