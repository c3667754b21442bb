#include "sofari/debias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "sofari/rng.hpp"

namespace sofari {

namespace {

void require_layer(const SofarEstimate& est, int k) {
  if (est.r() < 2) throw InvalidArgument("inference requires rank >= 2");
  if (k < 0 || k >= est.r()) throw InvalidArgument("layer index out of range");
}

double z_of(const MatrixXd& u, const MatrixXd& gram, int k) {
  const double z = u.col(k).dot(gram * u.col(k));
  if (!(z > 1e-12)) throw DegenerateLayer("layer " + std::to_string(k + 1) + " has u'Sigma u <= 1e-12");
  return z;
}

// Columns of `u` other than k (strong) or beyond k (weak).
MatrixXd others(const MatrixXd& u, int k, Variant variant) {
  const int r = static_cast<int>(u.cols());
  if (variant == Variant::Weak) return u.rightCols(r - k - 1);
  MatrixXd out(u.rows(), r - 1);
  for (int i = 0, c = 0; i < r; ++i)
    if (i != k) out.col(c++) = u.col(i);
  return out;
}

MatrixXd others_c(const SofarEstimate& est, int k, Variant variant) {
  const MatrixXd u = est.u();
  const MatrixXd& v = est.triple.v;
  MatrixXd c = MatrixXd::Zero(u.rows(), v.rows());
  for (int i = (variant == Variant::Weak ? k + 1 : 0); i < est.r(); ++i)
    if (i != k) c.noalias() += u.col(i) * v.col(i).transpose();
  return c;
}

Variant effective(Variant v) { return v == Variant::Weak ? Variant::Weak : Variant::Strong; }

MatrixXd build_m(const SofarEstimate& est, const RegressionData& data, int k, Variant variant) {
  require_layer(est, k);
  const double z = z_of(est.u(), data.gram(), k);
  return -(data.gram() * others_c(est, k, variant)) / z;
}

}  // namespace

MatrixXd build_w(const MatrixXd& theta, const MatrixXd& gram, const MatrixXd& u_other, double z, double* cond) {
  const int p = static_cast<int>(theta.rows());
  const int m = static_cast<int>(u_other.cols());
  if (cond) *cond = 1.0;
  if (m == 0) return theta;
  const MatrixXd su = gram * u_other;
  const MatrixXd inner = MatrixXd::Identity(m, m) - (u_other.transpose() * su) / z;
  Eigen::JacobiSVD<MatrixXd> svd(inner);
  const VectorXd& sv = svd.singularValues();
  const double c = sv(m - 1) > 0 ? sv(0) / sv(m - 1) : std::numeric_limits<double>::infinity();
  if (cond) *cond = c;
  if (!(c < 1e10)) {
    std::ostringstream os;
    os << "inner matrix is numerically singular (condition " << c << "); eigengap too small";
    throw SingularInnerMatrix(os.str(), c);
  }
  const MatrixXd solved = inner.fullPivLu().solve(u_other.transpose());  // inner^-1 U'
  return theta * (MatrixXd::Identity(p, p) + su * solved / z);
}

MatrixXd build_m_strong(const SofarEstimate& est, const RegressionData& data, int k) {
  return build_m(est, data, k, Variant::Strong);
}

MatrixXd build_m_weak(const SofarEstimate& est, const RegressionData& data, int k) {
  return build_m(est, data, k, Variant::Weak);
}

MatrixXd build_w_strong(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k) {
  require_layer(est, k);
  const MatrixXd u = est.u();
  return build_w(theta, data.gram(), others(u, k, Variant::Strong), z_of(u, data.gram(), k));
}

MatrixXd build_w_weak(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k) {
  require_layer(est, k);
  const MatrixXd u = est.u();
  return build_w(theta, data.gram(), others(u, k, Variant::Weak), z_of(u, data.gram(), k));
}

LayerContext make_context(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k,
                          Variant variant) {
  require_layer(est, k);
  const Variant eff = effective(variant);
  const MatrixXd u = est.u();
  LayerContext ctx;
  ctx.k = k;
  ctx.variant = variant;
  ctx.z_kk = z_of(u, data.gram(), k);
  ctx.c_other = others_c(est, k, eff);
  ctx.u_other = others(u, k, eff);
  ctx.m_k = -(data.gram() * ctx.c_other) / ctx.z_kk;
  ctx.w_k = build_w(theta, data.gram(), ctx.u_other, ctx.z_kk, &ctx.inner_condition);
  ctx.c1_hat = MatrixXd::Zero(u.rows(), est.triple.q());
  if (eff == Variant::Weak && k > 0) ctx.c1_hat = u.leftCols(k) * est.triple.v.leftCols(k).transpose();
  return ctx;
}

VectorXd score(const LayerContext& ctx, const SofarEstimate& est, const RegressionData& data) {
  const MatrixXd u = est.u();
  const MatrixXd& v = est.triple.v;
  if (effective(ctx.variant) == Variant::Weak) {
    const NuisanceView view = make_view(u, v, ctx.k, Variant::Weak);
    return grad_u_peeled(data, view, u, v, ctx.k) - ctx.m_k * grad_v_peeled(data, view, u, v, ctx.k);
  }
  return grad_u(data, u, v, ctx.k) - ctx.m_k * grad_v(data, u, v, ctx.k);
}

VectorXd score_strong(const SofarEstimate& est, const RegressionData& data, int k) {
  LayerContext ctx;
  ctx.k = k;
  ctx.variant = Variant::Strong;
  ctx.m_k = build_m_strong(est, data, k);
  return score(ctx, est, data);
}

VectorXd score_weak(const SofarEstimate& est, const RegressionData& data, int k) {
  LayerContext ctx;
  ctx.k = k;
  ctx.variant = Variant::Weak;
  ctx.m_k = build_m_weak(est, data, k);
  return score(ctx, est, data);
}

VectorXd debias_u(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k,
                  Variant variant) {
  const LayerContext ctx = make_context(est, theta, data, k, variant);
  return est.u().col(k) - ctx.w_k * score(ctx, est, data);
}

double debias_d2(const SofarEstimate& est, const MatrixXd& theta, const RegressionData& data, int k,
                 Variant variant) {
  const LayerContext ctx = make_context(est, theta, data, k, variant);
  const VectorXd uk = est.u().col(k);
  return uk.squaredNorm() - 2.0 * uk.dot(ctx.w_k * score(ctx, est, data));
}

MatrixXd variance_core(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                       const MatrixXd& sigma_e) {
  const VectorXd uk = est.u().col(ctx.k);
  const VectorXd vk = est.triple.v.col(ctx.k);
  const MatrixXd sm = sigma_e * ctx.m_k.transpose();  // Se M'
  return ctx.z_kk * ctx.m_k * sm + vk.dot(sigma_e * vk) * gram - 2.0 * (gram * uk) * (vk.transpose() * sm);
}

double variance_u(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram, const MatrixXd& sigma_e,
                  const VectorXd& a) {
  if (!(a.norm() > 0)) throw InvalidArgument("contrast vector must be nonzero");
  const VectorXd wa = ctx.w_k.transpose() * a;
  return wa.dot(variance_core(ctx, est, gram, sigma_e) * wa);
}

double variance_d2(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                   const MatrixXd& sigma_e) {
  const VectorXd wu = ctx.w_k.transpose() * est.u().col(ctx.k);
  return 4.0 * wu.dot(variance_core(ctx, est, gram, sigma_e) * wu);
}

namespace {

struct Variances {
  VectorXd var_u;
  double var_d2;
  bool positive() const { return var_d2 > 0 && (var_u.array() > 0).all(); }
};

Variances all_variances(const LayerContext& ctx, const SofarEstimate& est, const MatrixXd& gram,
                        const MatrixXd& sigma_e) {
  const MatrixXd core = variance_core(ctx, est, gram, sigma_e);
  const MatrixXd full = ctx.w_k * core * ctx.w_k.transpose();
  const VectorXd wu = ctx.w_k.transpose() * est.u().col(ctx.k);
  return {full.diagonal(), 4.0 * wu.dot(core * wu)};
}

DebiasedLayer debias_one(const RegressionData& data, const SofarEstimate& est, const MatrixXd& theta,
                         const ErrorCovEstimate& se, Variant variant, int k) {
  DebiasedLayer out;
  out.k = k;
  try {
    out.context = make_context(est, theta, data, k, variant);
    out.score = score(out.context, est, data);
    const VectorXd uk = est.u().col(k);
    const VectorXd wpsi = out.context.w_k * out.score;
    out.u_hat = uk - wpsi;
    out.d2_hat = uk.squaredNorm() - 2.0 * uk.dot(wpsi);
    Variances v = all_variances(out.context, est, data.gram(), se.sigma);
    if (!v.positive() && se.sample.size() > 0) {
      v = all_variances(out.context, est, data.gram(), se.sample);
      out.used_fallback = true;
    }
    out.var_u = v.var_u;
    out.var_d2 = v.var_d2;
    if (!v.positive()) {
      out.ok = false;
      out.failure = "NonPositiveVariance";
    }
  } catch (const Error& e) {
    out.ok = false;
    out.failure = e.what();
  }
  return out;
}

}  // namespace

std::vector<DebiasedLayer> debias_layers(const RegressionData& data, const SofarEstimate& est, const MatrixXd& theta,
                                         const ErrorCovEstimate& sigma_e, Variant variant, int workers) {
  if (est.r() < 2) throw InvalidArgument("inference requires rank >= 2");
  const int r = est.r();
  data.gram();  // materialize the cache before sharing across threads
  data.xty();
  std::vector<DebiasedLayer> layers(r);
  const int w = std::max(1, std::min(workers, r));
  if (w == 1) {
    for (int k = 0; k < r; ++k) layers[k] = debias_one(data, est, theta, sigma_e, variant, k);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
      pool.emplace_back([&, t] {
        for (int k = t; k < r; k += w) layers[k] = debias_one(data, est, theta, sigma_e, variant, k);
      });
    for (auto& th : pool) th.join();
  }
  return layers;
}

bool SofariResult::all_ok() const {
  return std::all_of(layers.begin(), layers.end(), [](const DebiasedLayer& l) { return l.ok; });
}

SofariResult run_sofari(const RegressionData& data, const SofariConfig& cfg) {
  if (cfg.variant == VariantChoice::Split) return run_sofari_split(data, cfg);
  SofariResult res;
  res.estimate = fit_sofar(data, cfg.sofar);
  if (res.estimate.r() < 2) throw InvalidArgument("inference requires rank >= 2");
  res.theta = nodewise_precision(data, cfg.nodewise);
  res.sigma_e = adaptive_threshold_cov(residuals(data, res.estimate), cfg.delta);
  if (cfg.variant == VariantChoice::Auto)
    res.variant = diagnose_orthogonality(res.estimate.triple, data).recommended;
  else
    res.variant = cfg.variant == VariantChoice::Strong ? Variant::Strong : Variant::Weak;
  res.n_used = data.n();
  res.layers = debias_layers(data, res.estimate, res.theta.theta, res.sigma_e, res.variant, cfg.workers);
  return res;
}

SofariResult run_sofari_folds(const RegressionData& fold1, const RegressionData& fold2, const SofariConfig& cfg) {
  if (fold1.p() != fold2.p() || fold1.q() != fold2.q()) throw InvalidArgument("folds have different shapes");
  SofariResult res;
  res.estimate = fit_sofar(fold2, cfg.sofar);
  if (res.estimate.r() < 2) throw InvalidArgument("inference requires rank >= 2");
  res.theta = nodewise_precision(fold1, cfg.nodewise);
  res.sigma_e = adaptive_threshold_cov(residuals(fold1, res.estimate), cfg.delta);
  res.variant = Variant::Split;
  res.n_used = fold1.n();
  // The layer contexts carry the inner construction; the label stays Split.
  res.layers = debias_layers(fold1, res.estimate, res.theta.theta, res.sigma_e, cfg.split_inner, cfg.workers);
  for (auto& l : res.layers) l.context.variant = Variant::Split;
  return res;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, std::uint64_t seed) {
  if (n < 4) throw InvalidArgument("sample splitting needs n >= 4");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng g(seed, 0x5351u);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[g.below(static_cast<std::uint64_t>(i) + 1)]);
  const int h = n / 2;
  std::vector<int> a(perm.begin(), perm.begin() + h), b(perm.begin() + h, perm.begin() + 2 * h);
  return {a, b};
}

SofariResult run_sofari_split(const RegressionData& data, const SofariConfig& cfg) {
  const auto [i1, i2] = split_indices(data.n(), cfg.split_seed);
  return run_sofari_folds(data.rows(i1), data.rows(i2), cfg);
}

OrthogonalityReport diagnose_orthogonality(const SvdTriple& t, const RegressionData& data) {
  const int r = t.r();
  const MatrixXd g = t.l.transpose() * data.gram() * t.l;
  OrthogonalityReport rep;
  rep.strong = VectorXd::Zero(r);
  rep.weak = VectorXd::Zero(r);
  rep.eigengap = VectorXd::Zero(std::max(0, r - 1));
  for (int k = 0; k < r; ++k)
    for (int j = 0; j < r; ++j) {
      if (j == k) continue;
      rep.strong(k) += std::abs(g(j, k));
      if (j > k) rep.weak(k) += t.d(j) * t.d(j) / t.d(k) * std::abs(g(j, k));
    }
  for (int k = 0; k + 1 < r; ++k) rep.eigengap(k) = t.d(k) * t.d(k) - t.d(k + 1) * t.d(k + 1);
  rep.threshold = 1.0 / std::sqrt(static_cast<double>(data.n()));
  rep.recommended = (rep.strong.array() < rep.threshold).all() ? Variant::Strong : Variant::Weak;
  return rep;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Strong: return "strong";
    case Variant::Weak: return "weak";
    case Variant::Split: return "split";
  }
  return "";
}

}  // namespace sofari
