#pragma once

#include <vector>

#include "flsa/types.hpp"

namespace flsa {

// Dual state of the fused-lasso problem. z has length n+1; z[0] is pinned to
// zero by construction and z[n] carries the accumulated terminal value, whose
// magnitude is reported as terminal_residual. Interior entries z[1..n-1] are
// the box-constrained dual coordinates: z[t] is the running sum of the first
// t residuals m_j - y_j, and the entry that binds at a change point at
// 0-based position p is exactly z[p].
struct DualCertificate {
  std::vector<double> z;
  double lambda = 0.0;
  double max_abs_violation = 0.0;        // max(|z[t]| - lambda, 0) over t=1..n-1
  double complementarity_violation = 0.0;  // max |z[p] - lambda*s| over stored jumps
  double terminal_residual = 0.0;        // |z[n]|
};

struct KktMismatch {
  int position = 0;    // 0-based change-point position
  double z_value = 0.0;
  int jump_sign = 0;
};

struct KktReport {
  bool feasible = false;
  double box_residual = 0.0;         // max(|z[t]| - lambda, 0)
  std::vector<KktMismatch> active_set_mismatch;
  double stationarity_residual = 0.0;
  double terminal_residual = 0.0;
  double tol = 0.0;
};

// Exact minimizer of  0.5*sum (y_t - m_t)^2 + lambda*sum |m_t - m_{t-1}|
// by a direct taut-string forward pass (O(n) typical cost).
Segmentation solve(const Signal& y, double lambda);

// Running residual sums z[t] = sum_{j<t} (m_j - y_j), compensated. When a
// lambda is supplied the box and complementarity violations are filled in
// relative to it.
DualCertificate dual_variables(const Signal& y, const std::vector<double>& m,
                               double lambda = 0.0);

// Optimality certificate for a candidate segmentation:
//   (a) every interior |z[t]| <= lambda + tol*max(lambda,1),
//   (b) at every stored change point |z| reaches lambda - tol*max(lambda,1)
//       with the sign of the jump (the sign clause is vacuous when lambda
//       itself is below the tolerance),
//   (c) the terminal sum vanishes: |z[n]| <= tol*(sum|y_t| + 1).
KktReport verify_kkt(const Signal& y, const Segmentation& seg, double lambda,
                     double tol = 1e-8);

// Smallest lambda whose solution is a single segment:
//   max_k k * |mean(y) - mean(y_1..y_k)|.
double lambda_max(const Signal& y);

// Closed-form biased segment levels for a known set of change points and
// jump signs: segment average plus lambda*(s_right - s_left)/length, with
// zero virtual signs outside the sequence. In staircase runs (equal
// consecutive signs) the interior bias cancels.
std::vector<double> segment_means(const Signal& y,
                                  const std::vector<int>& change_points,
                                  const std::vector<int>& signs, double lambda);

// Replaces each level by the unbiased within-segment average, merging
// neighbors whose re-estimated levels coincide.
Segmentation polish(const Signal& y, const Segmentation& seg);

// Independent reference solver: cyclic coordinate ascent on the dual box QP
//   max sum_t (z_t - z_{t+1}) y_t - 0.5*(z_t - z_{t+1})^2   s.t. |z_t| <= lambda,
// iterated until the primal-dual gap drops below tol. The iteration may reach
// an exact fixed point of the double-precision update whose residual gap sits
// at the rounding floor for the objective's magnitude; such a point is
// accepted and the remaining gap (error bound: ||m - m*||_2 <= sqrt(2*gap))
// is written to *achieved_gap when provided. Throws ConvergenceError when the
// sweep cap is reached or a stall leaves a gap above that floor.
Segmentation oracle_solve(const Signal& y, double lambda, double tol = 1e-12,
                          long max_sweeps = 4000000,
                          double* achieved_gap = nullptr);

}  // namespace flsa
