#pragma once

#include <vector>

#include "flsa/types.hpp"

namespace flsa {

// Segment-constant variance estimates: same geometry as Segmentation, levels
// are per-segment variances and must be strictly positive.
struct VarianceSegmentation {
  int n = 0;
  std::vector<int> change_points;
  std::vector<double> levels;
  double lambda = 0.0;

  int num_segments() const { return static_cast<int>(levels.size()); }
};

// Variance-only filtering: the penalized likelihood problem for piecewise
// variances reduces to running the mean solver on the squared data, so the
// levels here equal expand(solve(y^2, lambda)) bit for bit. A nonpositive
// level means lambda is too large for the data scale and throws
// DegenerateVarianceError naming the offending segment.
VarianceSegmentation variance_solve(const Signal& y, double lambda);

struct TrendKktReport {
  bool feasible = false;
  double box_residual = 0.0;       // max(|z| - lambda, 0) over the interior
  double coupling_residual = 0.0;  // max |z - lambda*sign(curvature)| at kinks
  double interior_curvature = 0.0; // max |second difference| where z is slack
  double end_residual = 0.0;       // residuals of the two terminal conditions
  int first_violation = -1;        // position of the worst offense, -1 if none
  double tol = 0.0;
};

// Piecewise-linear fit: kink_points are the 0-based interior positions where
// the second difference of `fitted` is nonzero; between them the fit is
// affine. `dual` holds z_t for interior positions t = 1..n-2 (entry i is
// position i+1), the integrated dual recovered from the fit.
struct TrendFit {
  std::vector<double> fitted;
  std::vector<int> kink_points;
  double lambda = 0.0;
  std::vector<double> dual;
  TrendKktReport kkt_residuals;
};

// Interior positions where |m_{t-1} - 2 m_t + m_{t+1}| exceeds tol.
std::vector<int> kinks_from(const std::vector<double>& fitted, double tol);

// Minimizes 0.5*sum (y_t - m_t)^2 + lambda * sum |m_{t-1} - 2 m_t + m_{t+1}|
// (the second sum over interior t). Operator splitting on the curvature
// variable proposes an active set; a nodal refit on that set produces an
// exactly piecewise-affine candidate which must then pass trend_verify_kkt
// at tol. Throws ConvergenceError with the best residual if the iteration
// cap is reached.
TrendFit trend_solve(const Signal& y, double lambda, double tol = 1e-8);

// Rebuilds the dual by double accumulation of the residual y - m under the
// zero end conditions and checks: |z| <= lambda on the interior, z pinned at
// +-lambda with the curvature's sign at each kink, zero curvature where z is
// strictly slack, and the two terminal sums returning to zero. Only
// fit.fitted is read; kinks are recomputed from it.
TrendKktReport trend_verify_kkt(const Signal& y, const TrendFit& fit,
                                double lambda, double tol);

}  // namespace flsa
