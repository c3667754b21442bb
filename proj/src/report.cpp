#include "sofari/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "sofari/rng.hpp"

namespace sofari {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw InvalidArgument("quantile level must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5, t = q * q;
    x = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * q /
        (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

ConfidenceInterval ci(double center, double variance, int n, double alpha) {
  if (!(variance > 0)) throw InvalidArgument("variance must be positive");
  if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (n < 1) throw InvalidArgument("n must be positive");
  ConfidenceInterval out;
  out.center = center;
  out.level = 1 - alpha;
  out.half_width = normal_quantile(1 - alpha / 2) * std::sqrt(variance / n);
  out.lower = center - out.half_width;
  out.upper = center + out.half_width;
  return out;
}

double standardized_stat(double est, double truth, double variance, int n) {
  if (!(variance > 0)) throw InvalidArgument("variance must be positive");
  return std::sqrt(static_cast<double>(n)) * (est - truth) / std::sqrt(variance);
}

double pvalue_two_sided(double t) { return std::erfc(std::abs(t) / std::sqrt(2.0)); }

std::vector<int> bh_fdr(const std::vector<double>& pvals, double q) {
  const size_t m = pvals.size();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pvals[a] < pvals[b]; });
  size_t cut = 0;
  for (size_t i = 1; i <= m; ++i)
    if (pvals[order[i - 1]] <= static_cast<double>(i) * q / m) cut = i;
  std::vector<int> out(order.begin(), order.begin() + cut);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> CoverageResult::stats(size_t c) const {
  std::vector<double> out;
  for (const auto& r : records[c])
    if (r.valid) out.push_back(r.stat);
  return out;
}

CoverageResult coverage_run(const CoverageConfig& cfg) {
  if (cfg.replications < 1) throw InvalidArgument("replications must be at least 1");
  if (!(cfg.alpha > 0 && cfg.alpha < 1)) throw InvalidArgument("alpha must lie in (0, 1)");
  cfg.setting.validate();
  CoverageResult res;
  const auto tab = tabulated_components(cfg.setting);
  const int r = cfg.setting.r;

  // Component layout: per layer the tabulated coordinates, then d_k^2.
  for (int k = 0; k < r; ++k) {
    for (int j : tab[k]) {
      CoverageSummary s;
      s.component = "u" + std::to_string(k + 1) + "," + std::to_string(j + 1);
      s.layer = k;
      s.coord = j;
      res.summaries.push_back(s);
    }
    CoverageSummary s;
    s.component = "d" + std::to_string(k + 1) + "^2";
    s.layer = k;
    res.summaries.push_back(s);
  }
  const size_t nc = res.summaries.size();
  res.records.assign(nc, std::vector<CoverageRecord>(cfg.replications));
  res.fitted_rank.assign(cfg.replications, 0);
  std::vector<char> failed(cfg.replications, 0);

  SofariConfig scfg = cfg.sofari;
  if (!cfg.rank_auto) scfg.sofar.rank = r;
  scfg.workers = 1;
  const double zq = normal_quantile(1 - cfg.alpha / 2);

  auto one = [&](int rep) {
    try {
      // Every replication draws its own coefficient matrix, design and noise.
      SimSetting rs = cfg.setting;
      rs.seed = replication_seed(cfg.setting.seed, rep);
      const SimInstance inst = gen_instance(rs);
      const MatrixXd u_star = inst.truth.u();
      SofariConfig local = scfg;
      local.split_seed = replication_seed(cfg.setting.seed ^ 0xA5A5A5A5ULL, rep);
      const SofariResult sr = run_sofari(inst.data, local);
      res.fitted_rank[rep] = sr.estimate.r();
      const MatrixXd u_tilde = sr.estimate.u();
      const double sqn = std::sqrt(static_cast<double>(sr.n_used));
      bool any_bad = sr.estimate.r() != r;
      for (size_t c = 0; c < nc; ++c) {
        const auto& s = res.summaries[c];
        CoverageRecord& rec = res.records[c][rep];
        if (s.layer >= sr.estimate.r() || !sr.layers[s.layer].ok) {
          any_bad = true;
          continue;
        }
        const DebiasedLayer& L = sr.layers[s.layer];
        double est, var, truth;
        if (s.coord >= 0) {
          const double sign = u_tilde.col(s.layer).dot(u_star.col(s.layer)) < 0 ? -1.0 : 1.0;
          est = L.u_hat(s.coord);
          var = L.var_u(s.coord);
          truth = sign * u_star(s.coord, s.layer);
        } else {
          est = L.d2_hat;
          var = L.var_d2;
          const double dk = inst.truth.d(s.layer);
          truth = dk * dk;
        }
        const double hw = zq * std::sqrt(var) / sqn;
        rec.estimate = est;
        rec.lower = est - hw;
        rec.upper = est + hw;
        rec.truth = truth;
        rec.stat = sqn * (est - truth) / std::sqrt(var);
        rec.valid = true;
      }
      failed[rep] = any_bad;
    } catch (const Error&) {
      failed[rep] = 1;
    }
  };

  const int w = std::max(1, std::min(cfg.workers, cfg.replications));
  if (w == 1) {
    for (int rep = 0; rep < cfg.replications; ++rep) one(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
      pool.emplace_back([&] {
        for (int rep; (rep = next.fetch_add(1)) < cfg.replications;) one(rep);
      });
    for (auto& th : pool) th.join();
  }

  // Aggregate in replication order; invalid records count as not covered.
  for (size_t c = 0; c < nc; ++c) {
    auto& s = res.summaries[c];
    s.replications = cfg.replications;
    double len = 0;
    int nvalid = 0;
    for (const auto& rec : res.records[c]) {
      if (!rec.valid) continue;
      ++nvalid;
      len += rec.upper - rec.lower;
      s.covered += (rec.lower <= rec.truth && rec.truth <= rec.upper);
    }
    s.cp = static_cast<double>(s.covered) / cfg.replications;
    s.mean_len = nvalid ? len / nvalid : std::numeric_limits<double>::quiet_NaN();
  }
  for (int rep = 0; rep < cfg.replications; ++rep)
    if (failed[rep]) res.failed_replications.push_back(rep);
  return res;
}

double silverman_bandwidth(const std::vector<double>& x) {
  const double m = static_cast<double>(x.size());
  if (x.empty()) throw InvalidArgument("no samples");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double sd = x.size() > 1 ? std::sqrt(ss / (m - 1)) : 0.0;
  if (!(sd > 0)) sd = 1.0;  // degenerate sample: unit-scale kernel
  return 1.06 * sd * std::pow(m, -0.2);
}

double kde_evaluate(const std::vector<double>& x, double h, double at) {
  const double norm = 1.0 / (x.size() * h * std::sqrt(2 * M_PI));
  double s = 0;
  for (double v : x) {
    const double z = (at - v) / h;
    s += std::exp(-0.5 * z * z);
  }
  return s * norm;
}

Kde kde_export(const std::vector<double>& x, int grid_points, double lo, double hi) {
  if (grid_points < 2) throw InvalidArgument("need at least two grid points");
  if (!(hi > lo)) throw InvalidArgument("empty grid range");
  Kde out;
  out.bandwidth = silverman_bandwidth(x);
  out.grid.resize(grid_points);
  out.density.resize(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    const double g = lo + (hi - lo) * i / (grid_points - 1);
    out.grid[i] = g;
    out.density[i] = kde_evaluate(x, out.bandwidth, g);
  }
  return out;
}

Kde kde_export(const std::vector<double>& x, int grid_points) {
  const double h = silverman_bandwidth(x);
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  return kde_export(x, grid_points, *mn - 4 * h, *mx + 4 * h);
}

}  // namespace sofari
