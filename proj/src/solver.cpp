#include "flsa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flsa/util.hpp"

namespace flsa {

namespace {

void require_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InputError("lambda must be a nonnegative finite number");
}

// Direct taut-string pass. The running pair (vmin,vmax) brackets the level
// of the current segment while (umin,umax) tracks how much slack is left
// before the lower/upper tube wall forces a jump; km/kp remember where the
// walls were last touched so the segment can be cut there.
std::vector<double> taut_string_fit(const std::vector<double>& y, double lambda) {
  const int n = static_cast<int>(y.size());
  std::vector<double> x(static_cast<std::size_t>(n));
  if (n == 1) {
    x[0] = y[0];
    return x;
  }

  int k = 0, k0 = 0, km = 0, kp = 0;
  double vmin = y[0] - lambda;
  double vmax = y[0] + lambda;
  double umin = lambda;
  double umax = -lambda;

  for (;;) {
    if (k == n - 1) {
      x[static_cast<std::size_t>(k)] = vmin + umin;
      return x;
    }
    if (y[static_cast<std::size_t>(k) + 1] + umin < vmin - lambda) {
      // Lower wall breached: emit the segment at vmin, jump down after km.
      for (int i = k0; i <= km; ++i) x[static_cast<std::size_t>(i)] = vmin;
      k = k0 = km = kp = km + 1;
      vmin = y[static_cast<std::size_t>(k)];
      vmax = y[static_cast<std::size_t>(k)] + 2.0 * lambda;
      umin = lambda;
      umax = -lambda;
    } else if (y[static_cast<std::size_t>(k) + 1] + umax > vmax + lambda) {
      // Upper wall breached: emit at vmax, jump up after kp.
      for (int i = k0; i <= kp; ++i) x[static_cast<std::size_t>(i)] = vmax;
      k = k0 = km = kp = kp + 1;
      vmin = y[static_cast<std::size_t>(k)] - 2.0 * lambda;
      vmax = y[static_cast<std::size_t>(k)];
      umin = lambda;
      umax = -lambda;
    } else {
      ++k;
      umin += y[static_cast<std::size_t>(k)] - vmin;
      umax += y[static_cast<std::size_t>(k)] - vmax;
      if (umin >= lambda) {
        vmin += (umin - lambda) / (k - k0 + 1);
        umin = lambda;
        km = k;
      }
      if (umax <= -lambda) {
        vmax += (umax + lambda) / (k - k0 + 1);
        umax = -lambda;
        kp = k;
      }
    }
    if (k < n - 1) continue;
    if (umin < 0.0) {
      for (int i = k0; i <= km; ++i) x[static_cast<std::size_t>(i)] = vmin;
      k = k0 = km = km + 1;
      vmin = y[static_cast<std::size_t>(k)];
      umin = lambda;
      umax = y[static_cast<std::size_t>(k)] + lambda - vmax;
    } else if (umax > 0.0) {
      for (int i = k0; i <= kp; ++i) x[static_cast<std::size_t>(i)] = vmax;
      k = k0 = kp = kp + 1;
      vmax = y[static_cast<std::size_t>(k)];
      umax = -lambda;
      umin = y[static_cast<std::size_t>(k)] - lambda - vmin;
    } else {
      double level = vmin + umin / (k - k0 + 1);
      for (int i = k0; i <= n - 1; ++i) x[static_cast<std::size_t>(i)] = level;
      return x;
    }
  }
}

}  // namespace

Segmentation solve(const Signal& y, double lambda) {
  require_lambda(lambda);
  std::vector<double> fit = taut_string_fit(y.values(), lambda);
  Segmentation seg = compress(fit, lambda);
  if (lambda == 0.0 || seg.change_points.empty()) return seg;

  // At critical lambdas (grazing tube contact) the forward pass can emit a
  // jump of rounding size whose direction is noise while the dual sits at
  // the wrong wall. A genuine jump always carries z_p = lambda * sign(jump)
  // to machine precision, so any sign disagreement marks an artifact; the
  // two levels involved agree to rounding error and are merged by length-
  // weighted average.
  for (int round = 0; round < seg.n; ++round) {
    std::vector<double> m = expand(seg);
    DualCertificate cert = dual_variables(y, m, lambda);
    std::vector<int> keep;
    bool any_bad = false;
    for (std::size_t k = 0; k < seg.change_points.size(); ++k) {
      int p = seg.change_points[k];
      if (seg.jump_sign(static_cast<int>(k)) !=
          sign_of(cert.z[static_cast<std::size_t>(p)]))
        any_bad = true;
      else
        keep.push_back(p);
    }
    if (!any_bad) break;
    std::vector<double> levels(keep.size() + 1);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      int lo = (k == 0) ? 0 : keep[k - 1];
      int hi = (k == levels.size() - 1) ? seg.n : keep[k];
      CompensatedSum s;
      for (int t = lo; t < hi; ++t) s.add(m[static_cast<std::size_t>(t)]);
      levels[k] = s.value() / (hi - lo);
    }
    // The averaging can itself equalize neighbors; strip those jumps too.
    std::vector<int> cps2;
    std::vector<double> levels2{levels[0]};
    for (std::size_t k = 1; k < levels.size(); ++k) {
      if (levels[k] != levels2.back()) {
        cps2.push_back(keep[k - 1]);
        levels2.push_back(levels[k]);
      }
    }
    seg = Segmentation{seg.n, cps2, levels2, lambda};
    if (seg.change_points.empty()) break;
  }
  seg.check();
  return seg;
}

DualCertificate dual_variables(const Signal& y, const std::vector<double>& m,
                               double lambda) {
  if (static_cast<int>(m.size()) != y.size())
    throw InputError("dual_variables: fit length must match the signal");
  require_lambda(lambda);
  const int n = y.size();
  DualCertificate cert;
  cert.lambda = lambda;
  cert.z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  CompensatedSum acc;
  for (int t = 0; t < n; ++t) {
    acc.add(m[static_cast<std::size_t>(t)] - y[t]);
    cert.z[static_cast<std::size_t>(t) + 1] = acc.value();
  }
  cert.terminal_residual = std::abs(cert.z[static_cast<std::size_t>(n)]);
  for (int t = 1; t <= n - 1; ++t) {
    double over = std::abs(cert.z[static_cast<std::size_t>(t)]) - lambda;
    if (over > cert.max_abs_violation) cert.max_abs_violation = over;
  }
  // Complementarity relative to the jumps present in m itself.
  for (int t = 1; t <= n - 1; ++t) {
    double jump = m[static_cast<std::size_t>(t)] - m[static_cast<std::size_t>(t) - 1];
    if (jump != 0.0) {
      double gap = std::abs(cert.z[static_cast<std::size_t>(t)] -
                            lambda * sign_of(jump));
      if (gap > cert.complementarity_violation) cert.complementarity_violation = gap;
    }
  }
  return cert;
}

KktReport verify_kkt(const Signal& y, const Segmentation& seg, double lambda,
                     double tol) {
  require_lambda(lambda);
  if (!(tol > 0.0)) throw InputError("verify_kkt: tol must be positive");
  seg.check();
  if (seg.n != y.size()) throw InputError("verify_kkt: segmentation length mismatch");

  const int n = y.size();
  std::vector<double> m = expand(seg);
  DualCertificate cert = dual_variables(y, m, lambda);

  KktReport report;
  report.tol = tol;
  double lam_scale = tol * std::max(lambda, 1.0);

  report.box_residual = std::max(cert.max_abs_violation, 0.0);
  bool box_ok = report.box_residual <= lam_scale;

  std::vector<int> signs = seg.jump_signs();
  for (std::size_t k = 0; k < seg.change_points.size(); ++k) {
    int p = seg.change_points[k];
    double zp = cert.z[static_cast<std::size_t>(p)];
    bool reaches = std::abs(zp) >= lambda - lam_scale;
    // With lambda at or below the tolerance the sign clause is vacuous: the
    // subgradient set collapses to {0} and carries no orientation.
    bool sign_ok = (lambda <= lam_scale) || (sign_of(zp) == signs[k]);
    if (!reaches || !sign_ok)
      report.active_set_mismatch.push_back({p, zp, signs[k]});
  }

  CompensatedSum abs_scale;
  for (int t = 0; t < n; ++t) abs_scale.add(std::abs(y[t]));
  double scale = abs_scale.value() + 1.0;
  report.terminal_residual = cert.terminal_residual;
  bool terminal_ok = report.terminal_residual <= tol * scale;

  // z is built from the residuals, so stationarity holds by construction;
  // the recomputation below guards the accumulator itself.
  double stat = 0.0;
  for (int t = 0; t < n; ++t) {
    double r = (m[static_cast<std::size_t>(t)] - y[t]) -
               (cert.z[static_cast<std::size_t>(t) + 1] - cert.z[static_cast<std::size_t>(t)]);
    stat = std::max(stat, std::abs(r));
  }
  report.stationarity_residual = stat;

  report.feasible = box_ok && report.active_set_mismatch.empty() && terminal_ok;
  return report;
}

double lambda_max(const Signal& y) {
  const int n = y.size();
  CompensatedSum total;
  for (int t = 0; t < n; ++t) total.add(y[t]);
  double mean = total.value() / n;
  CompensatedSum partial;
  double best = 0.0;
  for (int k = 1; k <= n; ++k) {
    partial.add(mean - y[k - 1]);
    best = std::max(best, std::abs(partial.value()));
  }
  return best;
}

std::vector<double> segment_means(const Signal& y,
                                  const std::vector<int>& change_points,
                                  const std::vector<int>& signs, double lambda) {
  require_lambda(lambda);
  if (signs.size() != change_points.size())
    throw InputError("segment_means: one sign per change point required");
  const int n = y.size();
  int prev = 0;
  for (int p : change_points) {
    if (p < 1 || p > n - 1 || p <= prev)
      throw InputError("segment_means: change points must be strictly increasing in 1..n-1");
    prev = p;
  }
  for (int s : signs)
    if (s != 1 && s != -1) throw InputError("segment_means: signs must be +1 or -1");

  const std::size_t m_count = change_points.size() + 1;
  std::vector<double> levels(m_count);
  for (std::size_t k = 0; k < m_count; ++k) {
    int lo = (k == 0) ? 0 : change_points[k - 1];
    int hi = (k == m_count - 1) ? n : change_points[k];
    int s_left = (k == 0) ? 0 : signs[k - 1];
    int s_right = (k == m_count - 1) ? 0 : signs[k];
    CompensatedSum sum;
    for (int t = lo; t < hi; ++t) sum.add(y[t]);
    int len = hi - lo;
    levels[k] = sum.value() / len + lambda * (s_right - s_left) / len;
  }
  return levels;
}

Segmentation polish(const Signal& y, const Segmentation& seg) {
  seg.check();
  if (seg.n != y.size()) throw InputError("polish: segmentation length mismatch");
  const int n = y.size();
  std::vector<int> cps = seg.change_points;
  std::vector<double> levels(cps.size() + 1);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    int lo = (k == 0) ? 0 : cps[k - 1];
    int hi = (k == levels.size() - 1) ? n : cps[k];
    CompensatedSum sum;
    for (int t = lo; t < hi; ++t) sum.add(y[t]);
    levels[k] = sum.value() / (hi - lo);
  }
  // Merge neighbors whose averages coincide, then recompute the merged
  // averages; repeat until stable (a merge can create a new coincidence).
  for (;;) {
    bool merged = false;
    std::vector<int> out_cps;
    for (std::size_t k = 0; k < cps.size(); ++k) {
      if (levels[k + 1] == levels[k])
        merged = true;
      else
        out_cps.push_back(cps[k]);
    }
    if (!merged) break;
    cps = out_cps;
    levels.assign(cps.size() + 1, 0.0);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      int lo = (k == 0) ? 0 : cps[k - 1];
      int hi = (k == levels.size() - 1) ? n : cps[k];
      CompensatedSum sum;
      for (int t = lo; t < hi; ++t) sum.add(y[t]);
      levels[k] = sum.value() / (hi - lo);
    }
  }
  Segmentation out{n, cps, levels, seg.lambda};
  out.check();
  return out;
}

namespace {

// Objectives evaluated in extended precision: the gap is a difference of two
// near-equal sums, and in plain double its floor sits above the tolerances
// the reference contract asks for.
long double primal_objective(const std::vector<double>& y,
                             const std::vector<double>& m, double lambda) {
  long double obj = 0.0L;
  for (std::size_t t = 0; t < y.size(); ++t) {
    long double r = static_cast<long double>(y[t]) - m[t];
    obj += 0.5L * r * r;
  }
  for (std::size_t t = 1; t < y.size(); ++t)
    obj += static_cast<long double>(lambda) *
           std::abs(static_cast<long double>(m[t]) - m[t - 1]);
  return obj;
}

long double dual_objective(const std::vector<double>& y,
                           const std::vector<double>& z) {
  long double obj = 0.0L;
  for (std::size_t t = 0; t < y.size(); ++t) {
    long double d = static_cast<long double>(z[t]) - z[t + 1];
    obj += d * y[t] - 0.5L * d * d;
  }
  return obj;
}

// Merge neighbors that agree to within tol, replacing runs by their average.
// Used for the coordinate-ascent output whose levels carry O(gap) jitter.
Segmentation compress_tolerant(const std::vector<double>& m, double lambda,
                               double tol) {
  const int n = static_cast<int>(m.size());
  std::vector<int> cps;
  std::vector<double> levels;
  int start = 0;
  CompensatedSum run;
  run.add(m[0]);
  for (int t = 1; t <= n; ++t) {
    bool boundary = (t == n) || std::abs(m[static_cast<std::size_t>(t)] -
                                         m[static_cast<std::size_t>(t) - 1]) > tol;
    if (boundary) {
      levels.push_back(run.value() / (t - start));
      if (t < n) cps.push_back(t);
      run.reset();
      start = t;
    }
    if (t < n) run.add(m[static_cast<std::size_t>(t)]);
  }
  // Averaging can still produce exactly equal neighbors; drop those jumps.
  std::vector<int> cps2;
  std::vector<double> levels2{levels[0]};
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (levels[k] != levels2.back()) {
      cps2.push_back(cps[k - 1]);
      levels2.push_back(levels[k]);
    }
  }
  Segmentation out{n, cps2, levels2, lambda};
  out.check();
  return out;
}

}  // namespace

Segmentation oracle_solve(const Signal& y, double lambda, double tol,
                          long max_sweeps, double* achieved_gap) {
  require_lambda(lambda);
  if (!(tol > 0.0)) throw InputError("oracle_solve: tol must be positive");
  const int n = y.size();
  const std::vector<double>& yv = y.values();

  if (lambda == 0.0 || n == 1) {
    if (achieved_gap) *achieved_gap = 0.0;
    return compress(yv, lambda);
  }

  // z[0..n] with fixed endpoints; interior coordinates maximized cyclically:
  //   z_t <- clip((z_{t-1} + z_{t+1} + y_t - y_{t-1})/2, [-lambda, lambda]).
  // This is the orientation consistent with the primal recovery
  // m_t = y_t + z_{t+1} - z_t and the sign coupling at change points.
  std::vector<double> z(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> m(static_cast<std::size_t>(n));

  double max_abs_y = 0.0;
  for (double v : yv) max_abs_y = std::max(max_abs_y, std::abs(v));

  auto finish = [&](double g) {
    if (achieved_gap) *achieved_gap = g;
    double merge_tol = 1e-9 * (1.0 + max_abs_y);
    return compress_tolerant(m, lambda, merge_tol);
  };

  double gap = std::numeric_limits<double>::infinity();
  double prev_gap = std::numeric_limits<double>::infinity();
  const long check_every = 16;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    bool moved = false;
    for (int t = 1; t <= n - 1; ++t) {
      double prop = 0.5 * (z[static_cast<std::size_t>(t) - 1] +
                           z[static_cast<std::size_t>(t) + 1] +
                           yv[static_cast<std::size_t>(t)] -
                           yv[static_cast<std::size_t>(t) - 1]);
      prop = std::clamp(prop, -lambda, lambda);
      if (prop != z[static_cast<std::size_t>(t)]) moved = true;
      z[static_cast<std::size_t>(t)] = prop;
    }
    if (moved && sweep % check_every != check_every - 1) continue;

    for (int t = 0; t < n; ++t)
      m[static_cast<std::size_t>(t)] = yv[static_cast<std::size_t>(t)] +
                                       z[static_cast<std::size_t>(t) + 1] -
                                       z[static_cast<std::size_t>(t)];
    long double p = primal_objective(yv, m, lambda);
    gap = static_cast<double>(p - dual_objective(yv, z));
    if (gap <= tol) return finish(gap);

    // Quantization floor: once z is a fixed point of the double-precision
    // update (or the gap stops shrinking), further sweeps cannot help. The
    // residual gap is then limited by rounding at the objective's magnitude,
    // with each of the ~n clipped coordinates contributing noise at the
    // lambda scale. Measured fixed points sit at 2.0-2.8 times
    // eps*(1+|P|)*(1+lambda)*sqrt(n) while agreeing with the exact solution
    // to machine precision, so the acceptance coefficient is 8.
    bool stalled = !moved || gap >= prev_gap * 0.999999;
    if (stalled) {
      double floor_accept =
          std::numeric_limits<double>::epsilon() *
          (1.0 + std::abs(static_cast<double>(p))) *
          (64.0 + 8.0 * (1.0 + lambda) * std::sqrt(static_cast<double>(n)));
      if (gap <= floor_accept) return finish(gap);
      if (!moved)
        throw ConvergenceError(
            "oracle_solve: iteration reached a fixed point with gap above "
            "the rounding floor",
            gap);
    }
    prev_gap = gap;
  }
  throw ConvergenceError("oracle_solve: duality gap did not reach tolerance", gap);
}

}  // namespace flsa
