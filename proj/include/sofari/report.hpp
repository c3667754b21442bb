#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofari/debias.hpp"
#include "sofari/simulate.hpp"

namespace sofari {

struct ConfidenceInterval {
  double lower = 0, upper = 0, level = 0, center = 0, half_width = 0;
};

double normal_cdf(double x);
double normal_quantile(double p);  // inverse of normal_cdf on (0, 1)

ConfidenceInterval ci(double center, double variance, int n, double alpha);
double standardized_stat(double est, double truth, double variance, int n);
double pvalue_two_sided(double t);

// Benjamini-Hochberg step-up; returns the rejected indices in increasing order.
std::vector<int> bh_fdr(const std::vector<double>& pvals, double q);

struct CoverageSummary {
  std::string component;  // e.g. "u1,1" (1-based) or "d1^2"
  int layer = 0;          // 0-based
  int coord = -1;         // 0-based coordinate, -1 for the squared singular value
  int covered = 0;
  double cp = 0.0;
  double mean_len = 0.0;
  int replications = 0;
};

// One replication's interval for one component.
struct CoverageRecord {
  double estimate = 0, lower = 0, upper = 0, truth = 0, stat = 0;
  bool valid = false;  // false when the layer failed or the rank was wrong
};

struct CoverageConfig {
  SimSetting setting;
  SofariConfig sofari;
  int replications = 200;
  double alpha = 0.05;
  int workers = 1;
  bool rank_auto = false;  // otherwise the fit uses the true rank
};

struct CoverageResult {
  std::vector<CoverageSummary> summaries;
  // records[c][rep] follows the order of `summaries`.
  std::vector<std::vector<CoverageRecord>> records;
  std::vector<int> failed_replications;
  std::vector<int> fitted_rank;

  // T statistics of component c over the valid replications.
  std::vector<double> stats(size_t c) const;
};

CoverageResult coverage_run(const CoverageConfig& cfg);

struct Kde {
  std::vector<double> grid, density;
  double bandwidth = 0.0;
};

double silverman_bandwidth(const std::vector<double>& samples);
double kde_evaluate(const std::vector<double>& samples, double bandwidth, double x);

// Gaussian-kernel density on an even grid. Without explicit bounds the grid
// covers [min - 4h, max + 4h] so the density integrates to one.
Kde kde_export(const std::vector<double>& samples, int grid_points);
Kde kde_export(const std::vector<double>& samples, int grid_points, double lo, double hi);

}  // namespace sofari
