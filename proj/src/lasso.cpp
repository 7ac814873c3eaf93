#include "flsa/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "flsa/rng.hpp"
#include "flsa/solver.hpp"
#include "flsa/util.hpp"

namespace flsa {

std::vector<double> BackMap::apply(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != n - 1)
    throw InputError("back_map: coefficient length must be n-1");
  CompensatedSum weighted;
  for (int t = 1; t <= n - 1; ++t)
    weighted.add((n - t) * x[static_cast<std::size_t>(t) - 1]);
  double m1 = y_mean - weighted.value() / n;
  std::vector<double> m(static_cast<std::size_t>(n));
  CompensatedSum run;
  run.add(m1);
  m[0] = m1;
  for (int t = 1; t < n; ++t) {
    run.add(x[static_cast<std::size_t>(t) - 1]);
    m[static_cast<std::size_t>(t)] = run.value();
  }
  return m;
}

LassoEquivalent to_lasso(const Signal& y) {
  const int n = y.size();
  if (n < 2) throw InputError("to_lasso: need at least two samples");
  LassoEquivalent out;
  CompensatedSum total;
  for (int t = 0; t < n; ++t) total.add(y[t]);
  double mean = total.value() / n;
  out.y_tilde.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) out.y_tilde[static_cast<std::size_t>(t)] = y[t] - mean;
  out.design.resize(n, n - 1);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n - 1; ++j) {
      out.design(i - 1, j - 1) =
          (i <= j) ? static_cast<double>(j - n) / n : static_cast<double>(j) / n;
    }
  }
  out.back_map = {n, mean};
  return out;
}

Eigen::MatrixXd normal_matrix(int n_samples) {
  if (n_samples < 2) throw InputError("normal_matrix: need at least two samples");
  const int p = n_samples - 1;
  Eigen::MatrixXd c(p, p);
  for (int i = 1; i <= p; ++i) {
    for (int k = i; k <= p; ++k) {
      double v = static_cast<double>(i) * (n_samples - k) / n_samples;
      c(i - 1, k - 1) = v;
      c(k - 1, i - 1) = v;
    }
  }
  return c;
}

namespace {

void validate_knots(int n_samples, const std::vector<int>& knots,
                    const std::vector<int>& signs) {
  if (n_samples < 2) throw InputError("irrep profile: need at least two samples");
  if (knots.empty()) throw InputError("irrep profile: knot set must be nonempty");
  if (signs.size() != knots.size())
    throw InputError("irrep profile: one sign per knot required");
  int prev = 0;
  for (int k : knots) {
    if (k < 1 || k > n_samples - 1 || k <= prev)
      throw InputError("irrep profile: knots must be strictly increasing in 1..n-1");
    prev = k;
  }
  for (int s : signs)
    if (s != 1 && s != -1) throw InputError("irrep profile: signs must be +1 or -1");
}

}  // namespace

double IrrepProfile::value_at(int position) const {
  // Linear spline with virtual anchors (0,0) and (n_samples,0).
  int lo = 0, hi = n_samples;
  double lo_v = 0.0, hi_v = 0.0;
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (knots[j] == position) return signs[j];
    if (knots[j] < position) {
      lo = knots[j];
      lo_v = signs[j];
    } else {
      hi = knots[j];
      hi_v = signs[j];
      break;
    }
  }
  double w = static_cast<double>(position - lo) / (hi - lo);
  return lo_v + w * (hi_v - lo_v);
}

IrrepProfile irrep_profile(int n_samples, const std::vector<int>& knots,
                           const std::vector<int>& signs) {
  validate_knots(n_samples, knots, signs);
  IrrepProfile prof;
  prof.n_samples = n_samples;
  prof.knots = knots;
  prof.signs = signs;
  std::size_t j = 0;
  for (int i = 1; i <= n_samples - 1; ++i) {
    if (j < knots.size() && knots[j] == i) {
      ++j;
      continue;
    }
    double v = prof.value_at(i);
    prof.off_indices.push_back(i);
    prof.off_values.push_back(v);
    prof.max_abs = std::max(prof.max_abs, std::abs(v));
  }
  return prof;
}

bool strong_irrep_holds(const IrrepProfile& profile, double delta) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw InputError("strong_irrep_holds: delta must lie in (0,1]");
  return profile.max_abs < delta;
}

double support_recovery_failure_fraction(const RecoveryWitnessConfig& config,
                                         std::uint64_t seed) {
  validate_knots(config.n_samples, config.knots, config.signs);
  if (!(config.sigma > 0.0))
    throw InputError("recovery witness: sigma must be positive (noiseless runs are degenerate)");
  if (config.reps < 1 || config.grid_points < 2)
    throw InputError("recovery witness: reps and grid_points must be positive");

  StepModel truth;
  truth.n = config.n_samples;
  truth.change_points = config.knots;
  truth.levels.push_back(config.base_level);
  for (int s : config.signs)
    truth.levels.push_back(truth.levels.back() + config.jump_size * s);
  truth.noise_sd = config.sigma;
  std::vector<double> clean = expand(truth);

  int failures = 0;
  for (int rep = 0; rep < config.reps; ++rep) {
    Rng rng(seed, static_cast<std::uint64_t>(rep));
    std::vector<double> noisy = clean;
    for (auto& v : noisy) v += config.sigma * rng.normal();
    Signal y(std::move(noisy));
    double lm = lambda_max(y);
    bool recovered = false;
    for (double lambda : geometric_lambda_grid(lm, config.grid_points)) {
      Segmentation seg = solve(y, lambda);
      if (seg.change_points == config.knots && seg.jump_signs() == config.signs) {
        recovered = true;
        break;
      }
    }
    if (!recovered) ++failures;
  }
  return static_cast<double>(failures) / config.reps;
}

RecoveryWitnessResult recovery_failure_witness(const RecoveryWitnessConfig& config,
                                      std::uint64_t seed) {
  IrrepProfile prof = irrep_profile(config.n_samples, config.knots, config.signs);
  if (prof.max_abs < 1.0 - 1e-12)
    throw InputError(
        "recovery_failure_witness: off-support profile stays below 1; the persistent "
        "failure argument needs a saturated profile (same-sign staircase)");
  RecoveryWitnessResult res;
  res.failure_fraction = support_recovery_failure_fraction(config, seed);
  res.threshold = 0.5 - 0.1;
  res.holds = res.failure_fraction >= res.threshold;
  return res;
}

}  // namespace flsa
