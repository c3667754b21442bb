#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sofari/core_model.hpp"

namespace sofari {

enum class Design { WeakOrth, IidGaussian, WeaklySparse };

struct SimSetting {
  Design design = Design::WeakOrth;
  int n = 200, p = 25, q = 15, r = 3;
  VectorXd d_star = (VectorXd(3) << 100, 15, 5).finished();
  int s1 = 3, s2 = 3;
  double rho_x = 0.3, rho_e = 0.3;
  double snr = 1.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws InvalidArgument / SupportOverflow
};

// Presets: 1, 2 weakly orthogonal design at (200,25,15) / (200,50,30);
// 3, 4 i.i.d. Gaussian design at the same sizes with d1 = 200 and s = 5;
// 5 weakly sparse layout at (200,50,30).
SimSetting preset(int id);

std::string design_name(Design d);
Design parse_design(const std::string& s);

struct SimInstance {
  RegressionData data;
  SvdTriple truth;
  MatrixXd sigma_e;  // sigma^2 * Sigma_E
  double noise_scale = 0.0;  // sigma^2
  MatrixXd noise;
};

MatrixXd ar1_cov(int m, double rho);

// RNG stream layout under setting.seed: 0 truth, 1 design, 2 noise.
SvdTriple gen_truth(const SimSetting& s);
MatrixXd gen_design(const SimSetting& s, const SvdTriple& truth);

struct NoiseDraw {
  MatrixXd e;
  double sigma2;
};
NoiseDraw gen_noise(const SimSetting& s, const SvdTriple& truth, const MatrixXd& x);

SimInstance gen_instance(const SimSetting& s);

// Instance with a fixed truth; design and noise drawn from `data_seed`.
// Used by replication loops, where the coefficient matrix stays fixed.
SimInstance gen_instance_with_truth(const SimSetting& s, const SvdTriple& truth,
                                    std::uint64_t data_seed);

// Components reported in coverage tables, per layer (0-based coordinates).
std::vector<std::vector<int>> tabulated_components(const SimSetting& s);

}  // namespace sofari
