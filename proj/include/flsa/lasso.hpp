#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "flsa/types.hpp"

namespace flsa {

// Affine map from lasso coefficients x (length n-1) back to levels m:
//   m_1 = mean(y) - (1/n) * sum_{t<n} (n-t) x_t,   m_t = m_1 + sum_{k<t} x_k.
struct BackMap {
  int n = 0;
  double y_mean = 0.0;
  std::vector<double> apply(const std::vector<double>& x) const;
};

// Centered lasso formulation equivalent to the fused problem: minimize
// 0.5*||y_tilde - A x||^2 + lambda*||x||_1, where column j of A integrates a
// jump at position j against the centering constraint.
struct LassoEquivalent {
  std::vector<double> y_tilde;   // y - mean(y)
  Eigen::MatrixXd design;        // n x (n-1)
  BackMap back_map;
};

LassoEquivalent to_lasso(const Signal& y);

// Gram matrix of the design in closed form: C_{ik} = i*(n_samples-k)/n_samples
// for i <= k (1-based), symmetric, size (n_samples-1)^2.
Eigen::MatrixXd normal_matrix(int n_samples);

// Off-support profile X s with X = C_{K^c,K} C_{K,K}^{-1}: a linear spline
// through (0,0), (K_j, s_j), (n_samples, 0). Exact-recovery analysis reads
// its sup-norm against 1.
struct IrrepProfile {
  int n_samples = 0;
  std::vector<int> knots;        // 0-based jump positions, in 1..n_samples-1
  std::vector<int> signs;        // +1/-1 per knot
  std::vector<int> off_indices;  // positions not in knots
  std::vector<double> off_values;
  double max_abs = 0.0;

  double value_at(int position) const;  // spline evaluation anywhere in 1..n-1
};

IrrepProfile irrep_profile(int n_samples, const std::vector<int>& knots,
                           const std::vector<int>& signs);

bool strong_irrep_holds(const IrrepProfile& profile, double delta);

// Monte Carlo witness that exact support recovery fails persistently when
// the profile reaches 1 off the support (same-sign staircase patterns).
// Scans a geometric lambda grid per replicate; a replicate counts as failed
// when no grid lambda recovers the support and signs exactly.
struct RecoveryWitnessConfig {
  int n_samples = 0;
  std::vector<int> knots;
  std::vector<int> signs;
  double base_level = 1.0;
  double jump_size = 1.0;
  double sigma = 0.01;
  int reps = 500;
  int grid_points = 200;
};

struct RecoveryWitnessResult {
  double failure_fraction = 0.0;
  double threshold = 0.0;
  bool holds = false;
};

// The Monte Carlo engine alone: fraction of replicates where no grid lambda
// achieves exact signed support recovery.
double support_recovery_failure_fraction(const RecoveryWitnessConfig& config,
                                         std::uint64_t seed);

// Precondition: sigma > 0 and the profile reaches >= 1 off the support;
// otherwise InputError. The verdict compares the failure fraction against
// 1/2 - 0.1 (symmetric noise floor minus Monte Carlo slack).
RecoveryWitnessResult recovery_failure_witness(const RecoveryWitnessConfig& config,
                                      std::uint64_t seed);

}  // namespace flsa
