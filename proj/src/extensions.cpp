#include "flsa/extensions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "flsa/errors.hpp"
#include "flsa/solver.hpp"
#include "flsa/util.hpp"

namespace flsa {

VarianceSegmentation variance_solve(const Signal& y, double lambda) {
  std::vector<double> sq(static_cast<std::size_t>(y.size()));
  for (int t = 0; t < y.size(); ++t) sq[static_cast<std::size_t>(t)] = y[t] * y[t];
  Segmentation seg = solve(Signal(sq), lambda);
  for (std::size_t k = 0; k < seg.levels.size(); ++k) {
    if (!(seg.levels[k] > 0.0))
      throw DegenerateVarianceError(
          "variance_solve: segment " + std::to_string(k) +
              " has nonpositive variance level " + std::to_string(seg.levels[k]) +
              "; lambda is too large for the data scale",
          static_cast<int>(k));
  }
  VarianceSegmentation out;
  out.n = seg.n;
  out.change_points = std::move(seg.change_points);
  out.levels = std::move(seg.levels);
  out.lambda = lambda;
  return out;
}

namespace {

// Symmetric pentadiagonal LDL^T factorization: diag/sub1/sub2 hold A's bands
// on input and the factor's bands on output.
struct Penta {
  std::vector<double> d, e1, e2;

  void factor() {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
      double di = d[i];
      if (i >= 1) di -= e1[i - 1] * e1[i - 1] * d[i - 1];
      if (i >= 2) di -= e2[i - 2] * e2[i - 2] * d[i - 2];
      d[i] = di;
      if (i + 1 < n) {
        double v = e1[i];
        if (i >= 1) v -= e1[i - 1] * e2[i - 1] * d[i - 1];
        e1[i] = v / di;
      }
      if (i + 2 < n) e2[i] /= di;
    }
  }

  void solve(std::vector<double>& b) const {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= 1) b[i] -= e1[i - 1] * b[i - 1];
      if (i >= 2) b[i] -= e2[i - 2] * b[i - 2];
    }
    for (std::size_t i = 0; i < n; ++i) b[i] /= d[i];
    for (std::size_t i = n; i-- > 0;) {
      if (i + 1 < n) b[i] -= e1[i] * b[i + 1];
      if (i + 2 < n) b[i] -= e2[i] * b[i + 2];
    }
  }
};

// w_r = m_r - 2 m_{r+1} + m_{r+2}, the curvature centered at r+1.
void second_diff(const std::vector<double>& m, std::vector<double>& w) {
  const std::size_t n = m.size();
  w.resize(n - 2);
  for (std::size_t r = 0; r + 2 < n; ++r)
    w[r] = m[r] - 2.0 * m[r + 1] + m[r + 2];
}

// Transpose action: out = D^T w, out length n.
void second_diff_t(const std::vector<double>& w, std::vector<double>& out,
                   std::size_t n) {
  out.assign(n, 0.0);
  for (std::size_t r = 0; r + 2 < n; ++r) {
    out[r] += w[r];
    out[r + 1] -= 2.0 * w[r];
    out[r + 2] += w[r];
  }
}

// Exact restricted minimizer over piecewise-affine fits with kinks in
// `centers` and prescribed curvature signs: parameterize by the nodal values
// at {0, centers..., n-1}, which makes the quadratic tridiagonal, and solve
//   (Phi^T Phi) v = Phi^T y - lambda * g
// where g is the gradient of sum_k s_k * curvature_k in nodal coordinates.
// Returns false when some prescribed sign is contradicted by the refit (the
// caller then drops those kinks and retries).
bool nodal_refit(const std::vector<double>& yv, double lambda,
                 std::vector<int>& centers, std::vector<int>& signs,
                 std::vector<double>& fitted) {
  const int n = static_cast<int>(yv.size());
  for (int round = 0;; ++round) {
    std::vector<int> q;
    q.push_back(0);
    for (int c : centers) q.push_back(c);
    q.push_back(n - 1);
    const int mkn = static_cast<int>(q.size());

    // Tridiagonal normal matrix and right-hand side of the nodal
    // least-squares problem, accumulated per inter-knot interval.
    std::vector<double> diag(static_cast<std::size_t>(mkn), 0.0);
    std::vector<double> off(static_cast<std::size_t>(mkn) - 1, 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(mkn), 0.0);
    for (int j = 0; j + 1 < mkn; ++j) {
      int a = q[static_cast<std::size_t>(j)];
      int b = q[static_cast<std::size_t>(j) + 1];
      double h = b - a;
      for (int t = a; t <= b; ++t) {
        double wr = (t - a) / h;        // weight on node j+1
        double wl = 1.0 - wr;           // weight on node j
        // Shared endpoints belong to one interval only.
        if (t == a && j > 0) continue;
        diag[static_cast<std::size_t>(j)] += wl * wl;
        diag[static_cast<std::size_t>(j) + 1] += wr * wr;
        off[static_cast<std::size_t>(j)] += wl * wr;
        rhs[static_cast<std::size_t>(j)] += wl * yv[static_cast<std::size_t>(t)];
        rhs[static_cast<std::size_t>(j) + 1] += wr * yv[static_cast<std::size_t>(t)];
      }
    }
    // Linear penalty term: curvature at interior knot j is
    //   (v_{j+1} - v_j)/h_j - (v_j - v_{j-1})/h_{j-1}.
    for (int j = 1; j + 1 < mkn; ++j) {
      double hl = q[static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(j) - 1];
      double hr = q[static_cast<std::size_t>(j) + 1] - q[static_cast<std::size_t>(j)];
      double s = lambda * signs[static_cast<std::size_t>(j) - 1];
      rhs[static_cast<std::size_t>(j) - 1] -= s / hl;
      rhs[static_cast<std::size_t>(j)] += s * (1.0 / hl + 1.0 / hr);
      rhs[static_cast<std::size_t>(j) + 1] -= s / hr;
    }

    // Thomas elimination.
    std::vector<double> c(static_cast<std::size_t>(mkn) - 1);
    std::vector<double> v(static_cast<std::size_t>(mkn));
    double piv = diag[0];
    c[0] = off[0] / piv;
    v[0] = rhs[0] / piv;
    for (int j = 1; j < mkn; ++j) {
      piv = diag[static_cast<std::size_t>(j)] -
            off[static_cast<std::size_t>(j) - 1] * c[static_cast<std::size_t>(j) - 1];
      if (j + 1 < mkn) c[static_cast<std::size_t>(j)] = off[static_cast<std::size_t>(j)] / piv;
      v[static_cast<std::size_t>(j)] =
          (rhs[static_cast<std::size_t>(j)] -
           off[static_cast<std::size_t>(j) - 1] * v[static_cast<std::size_t>(j) - 1]) /
          piv;
    }
    for (int j = mkn - 2; j >= 0; --j)
      v[static_cast<std::size_t>(j)] -= c[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j) + 1];

    fitted.resize(static_cast<std::size_t>(n));
    for (int j = 0; j + 1 < mkn; ++j) {
      int a = q[static_cast<std::size_t>(j)];
      int b = q[static_cast<std::size_t>(j) + 1];
      double h = b - a;
      for (int t = a; t <= b; ++t) {
        double wr = (t - a) / h;
        fitted[static_cast<std::size_t>(t)] =
            (1.0 - wr) * v[static_cast<std::size_t>(j)] + wr * v[static_cast<std::size_t>(j) + 1];
      }
    }

    // Keep only kinks whose realized curvature agrees with its prescribed
    // sign; a contradiction means the active set was too large.
    std::vector<int> keep_c, keep_s;
    bool all_ok = true;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      int cpos = centers[k];
      double w = fitted[static_cast<std::size_t>(cpos) - 1] -
                 2.0 * fitted[static_cast<std::size_t>(cpos)] +
                 fitted[static_cast<std::size_t>(cpos) + 1];
      if (sign_of(w) == signs[k]) {
        keep_c.push_back(cpos);
        keep_s.push_back(signs[k]);
      } else {
        all_ok = false;
      }
    }
    if (all_ok) return true;
    if (round > 64) return false;
    centers = std::move(keep_c);
    signs = std::move(keep_s);
  }
}

// Integrated dual of the trend problem: z_{t+1} = r_t + 2 z_t - z_{t-1}
// under zero starting conditions; returns the full extended array, where
// entry k is z at position k-1 (two leading virtual zeros).
std::vector<double> trend_dual_extended(const std::vector<double>& yv,
                                        const std::vector<double>& m) {
  const std::size_t n = yv.size();
  std::vector<double> uu(n + 2, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    uu[t + 2] = (yv[t] - m[t]) + 2.0 * uu[t + 1] - uu[t];
  return uu;
}

}  // namespace

std::vector<int> kinks_from(const std::vector<double>& fitted, double tol) {
  std::vector<int> out;
  for (std::size_t c = 1; c + 1 < fitted.size(); ++c) {
    double w = fitted[c - 1] - 2.0 * fitted[c] + fitted[c + 1];
    if (std::abs(w) > tol) out.push_back(static_cast<int>(c));
  }
  return out;
}

TrendKktReport trend_verify_kkt(const Signal& y, const TrendFit& fit,
                                double lambda, double tol) {
  if (!(tol > 0.0)) throw InputError("trend_verify_kkt: tol must be positive");
  if (!(lambda >= 0.0)) throw InputError("trend_verify_kkt: lambda must be nonnegative");
  const int n = y.size();
  if (static_cast<int>(fit.fitted.size()) != n)
    throw InputError("trend_verify_kkt: fit length does not match the signal");
  if (n < 3) throw InputError("trend_verify_kkt: need at least three samples");

  const std::vector<double>& yv = y.values();
  const std::vector<double>& m = fit.fitted;
  double scale_y = 0.0;
  for (double v : yv) scale_y = std::max(scale_y, std::abs(v));

  std::vector<double> uu = trend_dual_extended(yv, m);
  const double lam_tol = tol * std::max(1.0, lambda);
  const double curve_tol = 1e-8 * (1.0 + scale_y);

  TrendKktReport rep;
  rep.tol = tol;
  auto worse = [&](double r, int pos, double current_worst) {
    if (r > current_worst) rep.first_violation = pos;
    return std::max(r, current_worst);
  };

  for (int c = 1; c + 1 < n; ++c) {
    double z = uu[static_cast<std::size_t>(c) + 1];
    double w = m[static_cast<std::size_t>(c) - 1] - 2.0 * m[static_cast<std::size_t>(c)] +
               m[static_cast<std::size_t>(c) + 1];
    double box = std::max(0.0, std::abs(z) - lambda);
    if (box > rep.box_residual) {
      rep.box_residual = box;
      if (box > lam_tol) rep.first_violation = c;
    }
    if (std::abs(w) > curve_tol) {
      double coupling = std::abs(z - lambda * sign_of(w));
      rep.coupling_residual = worse(coupling, c, rep.coupling_residual);
    } else if (std::abs(z) < lambda - lam_tol) {
      rep.interior_curvature = worse(std::abs(w), c, rep.interior_curvature);
    }
  }

  // The two terminal conditions: the doubly accumulated residual must return
  // to zero, which is the discrete version of the fit being orthogonal to
  // affine trends. The accumulation touches every sample, so the tolerance
  // carries the length and data scale.
  double end_scale = static_cast<double>(n) * (1.0 + scale_y);
  rep.end_residual = std::max(std::abs(uu[static_cast<std::size_t>(n)]),
                              std::abs(uu[static_cast<std::size_t>(n) + 1]));

  bool box_ok = rep.box_residual <= lam_tol;
  bool coupling_ok = rep.coupling_residual <= lam_tol;
  bool interior_ok = rep.interior_curvature <= curve_tol;
  bool ends_ok = rep.end_residual <= tol * end_scale;
  rep.feasible = box_ok && coupling_ok && interior_ok && ends_ok;
  if (rep.feasible) rep.first_violation = -1;
  return rep;
}

TrendFit trend_solve(const Signal& y, double lambda, double tol) {
  const int n = y.size();
  if (n < 3) throw InputError("trend_solve: need at least three samples");
  if (!(lambda >= 0.0)) throw InputError("trend_solve: lambda must be nonnegative");
  if (!(tol > 0.0)) throw InputError("trend_solve: tol must be positive");
  const std::vector<double>& yv = y.values();

  auto package = [&](std::vector<double> fitted) {
    TrendFit fit;
    fit.fitted = std::move(fitted);
    fit.lambda = lambda;
    double scale_y = 0.0;
    for (double v : yv) scale_y = std::max(scale_y, std::abs(v));
    fit.kink_points = kinks_from(fit.fitted, 1e-8 * (1.0 + scale_y));
    std::vector<double> uu = trend_dual_extended(yv, fit.fitted);
    fit.dual.assign(uu.begin() + 2, uu.end() - 2);
    fit.kkt_residuals = trend_verify_kkt(y, fit, lambda, tol);
    return fit;
  };

  if (lambda == 0.0) return package(yv);

  // Operator splitting on the curvature variable: m-step solves a strictly
  // convex quadratic with the pentadiagonal matrix I + rho D^T D, w-step is
  // soft thresholding, and the multiplier step is standard. The sparse w
  // proposes an active set; each probe refits exactly on that set and runs
  // the certificate, so the splitting only has to localize the kinks, not
  // polish them.
  const std::size_t wn = static_cast<std::size_t>(n) - 2;
  std::vector<double> w(wn, 0.0), u(wn, 0.0), dm(wn), m(yv), rhs, dtw;
  double rho = 1.0 + lambda;

  Penta fac;
  auto refactor = [&]() {
    fac.d.assign(static_cast<std::size_t>(n), 1.0);
    fac.e1.assign(static_cast<std::size_t>(n) - 1, 0.0);
    fac.e2.assign(static_cast<std::size_t>(n) - 2, 0.0);
    for (std::size_t r = 0; r + 2 < static_cast<std::size_t>(n); ++r) {
      fac.d[r] += rho;
      fac.d[r + 1] += 4.0 * rho;
      fac.d[r + 2] += rho;
      fac.e1[r] += -2.0 * rho;
      fac.e1[r + 1] += -2.0 * rho;
      fac.e2[r] += rho;
    }
    fac.factor();
  };
  refactor();

  double best_residual = std::numeric_limits<double>::infinity();
  const int max_iters = 100000;
  for (int iter = 1; iter <= max_iters; ++iter) {
    for (std::size_t r = 0; r < wn; ++r) dm[r] = w[r] - u[r];
    second_diff_t(dm, dtw, static_cast<std::size_t>(n));
    rhs.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
      rhs[static_cast<std::size_t>(t)] =
          yv[static_cast<std::size_t>(t)] + rho * dtw[static_cast<std::size_t>(t)];
    fac.solve(rhs);
    m.swap(rhs);

    second_diff(m, dm);
    double thr = lambda / rho;
    double primal_res = 0.0, dual_res = 0.0;
    for (std::size_t r = 0; r < wn; ++r) {
      double wold = w[r];
      double v = dm[r] + u[r];
      double wnew = 0.0;
      if (v > thr) wnew = v - thr;
      else if (v < -thr) wnew = v + thr;
      w[r] = wnew;
      u[r] += dm[r] - wnew;
      primal_res = std::max(primal_res, std::abs(dm[r] - wnew));
      dual_res = std::max(dual_res, rho * std::abs(wnew - wold));
    }

    if (iter % 25 == 0 || primal_res + dual_res == 0.0) {
      std::vector<int> centers, signs;
      for (std::size_t r = 0; r < wn; ++r)
        if (w[r] != 0.0) {
          centers.push_back(static_cast<int>(r) + 1);
          signs.push_back(sign_of(w[r]));
        }
      std::vector<double> candidate;
      if (nodal_refit(yv, lambda, centers, signs, candidate)) {
        TrendFit fit = package(std::move(candidate));
        if (fit.kkt_residuals.feasible) return fit;
        best_residual = std::min(
            best_residual,
            std::max({fit.kkt_residuals.box_residual,
                      fit.kkt_residuals.coupling_residual,
                      fit.kkt_residuals.end_residual}));
      }
      // Residual balancing keeps the splitting well conditioned across
      // lambda scales.
      if (primal_res > 10.0 * dual_res && rho < 1e8) {
        rho *= 2.0;
        for (std::size_t r = 0; r < wn; ++r) u[r] *= 0.5;
        refactor();
      } else if (dual_res > 10.0 * primal_res && rho > 1e-8) {
        rho *= 0.5;
        for (std::size_t r = 0; r < wn; ++r) u[r] *= 2.0;
        refactor();
      }
    }
  }
  throw ConvergenceError("trend_solve: active set did not stabilize to a certified fit",
                         best_residual);
}

}  // namespace flsa
