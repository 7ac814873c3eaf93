#include "flsa/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "flsa/errors.hpp"
#include "flsa/rng.hpp"
#include "flsa/solver.hpp"
#include "flsa/util.hpp"

namespace flsa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double now_seconds() {
  using Clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(Clock::now().time_since_epoch()).count();
}

double mean_or_nan(const std::vector<double>& v) {
  double sum = 0.0;
  long k = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      sum += x;
      ++k;
    }
  return k > 0 ? sum / static_cast<double>(k) : kNaN;
}

void require_certified(const Signal& y, const Segmentation& seg, double lambda,
                       const std::string& experiment, int rep) {
  KktReport kkt = verify_kkt(y, seg, lambda, 1e-8);
  if (kkt.feasible) return;
  std::ostringstream os;
  os << experiment << ": replicate " << rep
     << " failed the optimality certificate at lambda=" << lambda << " (box "
     << kkt.box_residual << ", stationarity " << kkt.stationarity_residual
     << ", terminal " << kkt.terminal_residual << ", sign mismatches "
     << kkt.active_set_mismatch.size() << ")";
  throw CertificateError(os.str());
}

Segmentation certified_solve(const Signal& y, double lambda,
                             const std::string& experiment, int rep) {
  Segmentation seg = solve(y, lambda);
  require_certified(y, seg, lambda, experiment, rep);
  return seg;
}

// Estimated points with no true point strictly closer than the window.
double spurious_count(const std::vector<int>& est, const std::vector<int>& truth,
                      double window) {
  int count = 0;
  for (int p : est) {
    bool matched = false;
    for (int t : truth)
      if (std::abs(p - t) < window) {
        matched = true;
        break;
      }
    if (!matched) ++count;
  }
  return static_cast<double>(count);
}

struct MiddleStats {
  double hug = kNaN;
  double spurious = kNaN;
};

// Both statistics come from a dedicated solve at lambda_max/3 so protocols
// with different working penalties stay comparable. The hug fraction is the
// share of interior positions of the second true segment where the dual sits
// within 1e-3*lambda of the +lambda wall.
MiddleStats middle_stats(const Signal& y, const StepModel& truth,
                         double lambda_third, const std::string& experiment,
                         int rep, double window) {
  MiddleStats out;
  if (truth.change_points.size() < 2) return out;
  Segmentation seg = certified_solve(y, lambda_third, experiment, rep);
  DualCertificate cert = dual_variables(y, expand(seg), lambda_third);
  const int a = truth.change_points[0];
  const int b = truth.change_points[1];
  if (b - a < 2) return out;
  long close = 0;
  for (int t = a + 1; t < b; ++t)
    if (cert.z[static_cast<std::size_t>(t)] >= lambda_third * (1.0 - 1e-3))
      ++close;
  out.hug = static_cast<double>(close) / static_cast<double>(b - a - 1);
  int sp = 0;
  for (int p : seg.change_points) {
    if (p <= a || p >= b) continue;
    if (p - a >= window && b - p >= window) ++sp;
  }
  out.spurious = static_cast<double>(sp);
  return out;
}

void validate_protocol(const StepModel& truth, double eps, int reps,
                       int threads) {
  truth.check();
  if (!(eps > 0.0 && eps < 1.0))
    throw InputError("experiment: eps must lie in (0, 1)");
  if (reps < 1) throw InputError("experiment: need at least one replicate");
  if (threads < 1) throw InputError("experiment: thread count must be positive");
}

AggregateRow reduce_rows(int n, int grid_index, int reps,
                         const std::vector<double>& lambdas,
                         const std::vector<char>& failed,
                         const std::vector<double>& cp_counts,
                         const std::vector<double>& spurious) {
  AggregateRow row;
  row.n = n;
  row.grid_index = grid_index;
  row.reps = reps;
  double lam_sum = 0.0, cp_sum = 0.0, sp_sum = 0.0;
  int failures = 0;
  for (int r = 0; r < reps; ++r) {
    lam_sum += lambdas[static_cast<std::size_t>(r)];
    cp_sum += cp_counts[static_cast<std::size_t>(r)];
    sp_sum += spurious[static_cast<std::size_t>(r)];
    if (failed[static_cast<std::size_t>(r)]) ++failures;
  }
  row.mean_lambda = lam_sum / reps;
  row.failures = failures;
  row.failure_frequency = static_cast<double>(failures) / reps;
  WilsonInterval wi = wilson_interval(failures, reps);
  row.wilson_lo = wi.lo;
  row.wilson_hi = wi.hi;
  row.mean_change_point_count = cp_sum / reps;
  row.mean_spurious_count = sp_sum / reps;
  row.rate_diagnostic = kNaN;
  return row;
}

}  // namespace

Signal generate(const StepModel& truth, std::uint64_t seed,
                std::uint64_t stream) {
  truth.check();
  std::vector<double> values = expand(truth);
  Rng rng(seed, stream);
  for (double& v : values) v += truth.noise_sd * rng.normal();
  return Signal(std::move(values));
}

StepModel plateau_model() {
  StepModel m;
  m.n = 4000;
  m.change_points = {1000, 2000};
  m.levels = {1.0, 2.0, 1.0};
  m.noise_sd = 1.0;
  return m;
}

StepModel staircase_model() {
  StepModel m;
  m.n = 4000;
  m.change_points = {1000, 2000};
  m.levels = {1.0, 2.0, 3.0};
  m.noise_sd = 1.0;
  return m;
}

McReport run_single_lambda_protocol(const StepModel& truth,
                                    double lambda_fraction, double eps,
                                    int reps, std::uint64_t seed,
                                    int threads) {
  validate_protocol(truth, eps, reps, threads);
  if (!(lambda_fraction > 0.0))
    throw InputError("experiment: lambda fraction must be positive");
  const double t0 = now_seconds();
  McReport report;
  report.experiment = "single_lambda";
  report.seed = seed;
  report.eps = eps;
  report.records.assign(static_cast<std::size_t>(reps), ReplicateRecord{});
  std::vector<double> lambdas(static_cast<std::size_t>(reps), 0.0);
  std::vector<char> failed(static_cast<std::size_t>(reps), 0);
  std::vector<double> cp_counts(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> spurious(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> hug(static_cast<std::size_t>(reps), kNaN);
  std::vector<double> mid_sp(static_cast<std::size_t>(reps), kNaN);
  const double window = eps * truth.n;
  parallel_for(reps, threads, [&](int rep) {
    const auto slot = static_cast<std::size_t>(rep);
    Signal y = generate(truth, seed, static_cast<std::uint64_t>(rep));
    const double top = lambda_max(y);
    const double lam = top * lambda_fraction;
    Segmentation seg = certified_solve(y, lam, report.experiment, rep);
    ReplicateRecord& rec = report.records[slot];
    rec.n = truth.n;
    rec.lambda = lam;
    rec.change_points = seg.change_points;
    rec.consistent = eps_sign_consistent(seg, truth, eps);
    lambdas[slot] = lam;
    failed[slot] = rec.consistent ? 0 : 1;
    cp_counts[slot] = static_cast<double>(seg.change_points.size());
    spurious[slot] = spurious_count(seg.change_points, truth.change_points, window);
    MiddleStats ms =
        middle_stats(y, truth, top / 3.0, report.experiment, rep, window);
    hug[slot] = ms.hug;
    mid_sp[slot] = ms.spurious;
  });
  report.aggregates.push_back(
      reduce_rows(truth.n, -1, reps, lambdas, failed, cp_counts, spurious));
  report.middle_hug_fraction = mean_or_nan(hug);
  report.mean_middle_spurious = mean_or_nan(mid_sp);
  report.monotone_nonincreasing = true;
  report.runtime_seconds = now_seconds() - t0;
  return report;
}

McReport run_grid_protocol(const StepModel& truth, double eps, int reps,
                           std::uint64_t seed, int threads, int grid_points) {
  validate_protocol(truth, eps, reps, threads);
  if (grid_points < 2)
    throw InputError("experiment: need at least two grid points");
  const double t0 = now_seconds();
  McReport report;
  report.experiment = "lambda_grid";
  report.seed = seed;
  report.eps = eps;
  report.records.assign(static_cast<std::size_t>(reps), ReplicateRecord{});
  const std::size_t cells = static_cast<std::size_t>(reps) * grid_points;
  std::vector<char> cell_failed(cells, 0);
  std::vector<double> cell_lambda(cells, 0.0);
  std::vector<double> cell_cps(cells, 0.0);
  std::vector<double> cell_sp(cells, 0.0);
  std::vector<double> rep_lambda(static_cast<std::size_t>(reps), 0.0);
  std::vector<char> rep_failed(static_cast<std::size_t>(reps), 0);
  std::vector<double> rep_cps(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> rep_sp(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> hug(static_cast<std::size_t>(reps), kNaN);
  std::vector<double> mid_sp(static_cast<std::size_t>(reps), kNaN);
  const double window = eps * truth.n;
  parallel_for(reps, threads, [&](int rep) {
    const auto slot = static_cast<std::size_t>(rep);
    Signal y = generate(truth, seed, static_cast<std::uint64_t>(rep));
    const double top = lambda_max(y);
    std::vector<double> grid = geometric_lambda_grid(top, grid_points);
    bool any_ok = false;
    int best_g = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<int> best_cps;
    const std::size_t base = slot * static_cast<std::size_t>(grid_points);
    for (int g = 0; g < grid_points; ++g) {
      const double lam = grid[static_cast<std::size_t>(g)];
      Segmentation seg = certified_solve(y, lam, report.experiment, rep);
      const bool ok = eps_sign_consistent(seg, truth, eps);
      any_ok = any_ok || ok;
      const std::size_t cell = base + static_cast<std::size_t>(g);
      cell_failed[cell] = ok ? 0 : 1;
      cell_lambda[cell] = lam;
      cell_cps[cell] = static_cast<double>(seg.change_points.size());
      cell_sp[cell] =
          spurious_count(seg.change_points, truth.change_points, window);
      const double dist = std::abs(lam - top / 3.0);
      if (dist < best_dist) {
        best_dist = dist;
        best_g = g;
        best_cps = seg.change_points;
      }
    }
    ReplicateRecord& rec = report.records[slot];
    rec.n = truth.n;
    rec.lambda = grid[static_cast<std::size_t>(best_g)];
    rec.change_points = best_cps;
    rec.consistent = any_ok;
    rep_lambda[slot] = rec.lambda;
    rep_failed[slot] = any_ok ? 0 : 1;
    rep_cps[slot] = static_cast<double>(best_cps.size());
    rep_sp[slot] = spurious_count(best_cps, truth.change_points, window);
    MiddleStats ms =
        middle_stats(y, truth, top / 3.0, report.experiment, rep, window);
    hug[slot] = ms.hug;
    mid_sp[slot] = ms.spurious;
  });
  report.aggregates.push_back(
      reduce_rows(truth.n, -1, reps, rep_lambda, rep_failed, rep_cps, rep_sp));
  std::vector<double> lam_g(static_cast<std::size_t>(reps));
  std::vector<char> fail_g(static_cast<std::size_t>(reps));
  std::vector<double> cps_g(static_cast<std::size_t>(reps));
  std::vector<double> sp_g(static_cast<std::size_t>(reps));
  for (int g = 0; g < grid_points; ++g) {
    for (int r = 0; r < reps; ++r) {
      const std::size_t cell = static_cast<std::size_t>(r) *
                                   static_cast<std::size_t>(grid_points) +
                               static_cast<std::size_t>(g);
      lam_g[static_cast<std::size_t>(r)] = cell_lambda[cell];
      fail_g[static_cast<std::size_t>(r)] = cell_failed[cell];
      cps_g[static_cast<std::size_t>(r)] = cell_cps[cell];
      sp_g[static_cast<std::size_t>(r)] = cell_sp[cell];
    }
    report.aggregates.push_back(
        reduce_rows(truth.n, g, reps, lam_g, fail_g, cps_g, sp_g));
  }
  report.middle_hug_fraction = mean_or_nan(hug);
  report.mean_middle_spurious = mean_or_nan(mid_sp);
  report.monotone_nonincreasing = true;
  report.runtime_seconds = now_seconds() - t0;
  return report;
}

McReport run_example1(int reps, std::uint64_t seed, int threads) {
  McReport report = run_single_lambda_protocol(plateau_model(), 1.0 / 3.0,
                                               0.02, reps, seed, threads);
  report.experiment = "example1";
  return report;
}

McReport run_example2(int reps, std::uint64_t seed, int threads) {
  McReport report =
      run_grid_protocol(staircase_model(), 0.01, reps, seed, threads, 50);
  report.experiment = "example2";
  return report;
}

McReport run_consistency_sweep(const ExperimentConfig& config) {
  const StepModel& tmpl = config.truth;
  tmpl.check();
  if (config.n_values.empty())
    throw ConfigError("consistency sweep: n_values must not be empty");
  for (std::size_t i = 1; i < config.n_values.size(); ++i)
    if (config.n_values[i] <= config.n_values[i - 1])
      throw ConfigError("consistency sweep: n_values must be strictly increasing");
  if (config.reps < 1)
    throw ConfigError("consistency sweep: reps must be positive");
  if (!(config.eps > 0.0 && config.eps < 1.0))
    throw ConfigError("consistency sweep: eps must lie in (0, 1)");
  if (config.threads < 1)
    throw ConfigError("consistency sweep: threads must be positive");

  const std::vector<int> signs = tmpl.jump_signs();
  for (std::size_t k = 1; k < signs.size(); ++k)
    if (signs[k] == signs[k - 1])
      throw ConfigError(
          "consistency sweep: consecutive jumps share a sign; same-sign "
          "staircases are the inconsistent regime, use run_example2 or the "
          "grid protocol instead");
  if (static_cast<int>(tmpl.change_points.size()) > config.max_change_points)
    throw ConfigError("consistency sweep: template exceeds max_change_points");
  for (std::size_t k = 0; k + 1 < tmpl.levels.size(); ++k) {
    const double jump = std::abs(tmpl.levels[k + 1] - tmpl.levels[k]);
    if (jump < config.min_jump - 1e-12 || jump > config.max_jump + 1e-12)
      throw ConfigError(
          "consistency sweep: jump size outside [min_jump, max_jump]");
  }
  switch (config.rule.kind) {
    case LambdaRule::Kind::kFixed:
    case LambdaRule::Kind::kFractionOfLambdaMax:
      if (!(config.rule.value > 0.0))
        throw ConfigError("consistency sweep: lambda rule value must be positive");
      break;
    case LambdaRule::Kind::kPowerOfN:
      if (!(config.rule.value > 0.0))
        throw ConfigError("consistency sweep: power rule scale must be positive");
      if (!(config.rule.exponent > 0.5 && config.rule.exponent < 1.0))
        throw ConfigError(
            "consistency sweep: power rule exponent must lie in (1/2, 1)");
      break;
  }

  std::vector<StepModel> models;
  models.reserve(config.n_values.size());
  for (int n : config.n_values) {
    StepModel m;
    m.n = n;
    m.levels = tmpl.levels;
    m.noise_sd = tmpl.noise_sd;
    for (int cp : tmpl.change_points) {
      int p = static_cast<int>(
          std::lround(static_cast<double>(cp) * n / tmpl.n));
      p = std::clamp(p, 1, n - 1);
      m.change_points.push_back(p);
    }
    for (std::size_t i = 1; i < m.change_points.size(); ++i)
      if (m.change_points[i] <= m.change_points[i - 1])
        throw ConfigError(
            "consistency sweep: n too small to separate the template's "
            "change points");
    m.check();
    int prev = 0;
    int min_len = n;
    for (int p : m.change_points) {
      min_len = std::min(min_len, p - prev);
      prev = p;
    }
    min_len = std::min(min_len, n - prev);
    if (min_len + 1e-9 < config.min_segment_fraction * n)
      throw ConfigError(
          "consistency sweep: a segment is shorter than min_segment_fraction");
    models.push_back(std::move(m));
  }

  const double t0 = now_seconds();
  McReport report;
  report.experiment = "consistency_sweep";
  report.seed = config.seed;
  report.eps = config.eps;
  const int n_count = static_cast<int>(config.n_values.size());
  const int total = n_count * config.reps;
  report.records.assign(static_cast<std::size_t>(total), ReplicateRecord{});
  std::vector<double> spurious(static_cast<std::size_t>(total), 0.0);
  parallel_for(total, config.threads, [&](int item) {
    const auto slot = static_cast<std::size_t>(item);
    const int n_idx = item / config.reps;
    const StepModel& truth = models[static_cast<std::size_t>(n_idx)];
    Signal y = generate(truth, config.seed, static_cast<std::uint64_t>(item));
    double lam = 0.0;
    switch (config.rule.kind) {
      case LambdaRule::Kind::kFixed:
        lam = config.rule.value;
        break;
      case LambdaRule::Kind::kFractionOfLambdaMax:
        lam = lambda_max(y) * config.rule.value;
        break;
      case LambdaRule::Kind::kPowerOfN:
        lam = config.rule.value *
              std::pow(static_cast<double>(truth.n), config.rule.exponent);
        break;
    }
    Segmentation seg = certified_solve(y, lam, report.experiment, item);
    ReplicateRecord& rec = report.records[slot];
    rec.n = truth.n;
    rec.lambda = lam;
    rec.change_points = seg.change_points;
    rec.consistent = eps_sign_consistent(seg, truth, config.eps);
    spurious[slot] = spurious_count(seg.change_points, truth.change_points,
                                    config.eps * truth.n);
  });

  std::vector<double> lam_n(static_cast<std::size_t>(config.reps));
  std::vector<char> fail_n(static_cast<std::size_t>(config.reps));
  std::vector<double> cps_n(static_cast<std::size_t>(config.reps));
  std::vector<double> sp_n(static_cast<std::size_t>(config.reps));
  for (int n_idx = 0; n_idx < n_count; ++n_idx) {
    for (int r = 0; r < config.reps; ++r) {
      const std::size_t slot =
          static_cast<std::size_t>(n_idx) * config.reps + r;
      const ReplicateRecord& rec = report.records[slot];
      lam_n[static_cast<std::size_t>(r)] = rec.lambda;
      fail_n[static_cast<std::size_t>(r)] = rec.consistent ? 0 : 1;
      cps_n[static_cast<std::size_t>(r)] =
          static_cast<double>(rec.change_points.size());
      sp_n[static_cast<std::size_t>(r)] = spurious[slot];
    }
    AggregateRow row = reduce_rows(config.n_values[static_cast<std::size_t>(n_idx)],
                                   -1, config.reps, lam_n, fail_n, cps_n, sp_n);
    if (config.rule.kind == LambdaRule::Kind::kPowerOfN) {
      const double clamped = std::max(
          row.failure_frequency, 1.0 / (static_cast<double>(config.reps) + 1.0));
      row.rate_diagnostic =
          -std::log(clamped) /
          std::pow(static_cast<double>(row.n), 2.0 * config.rule.exponent - 1.0);
    }
    report.aggregates.push_back(row);
  }

  // Failure frequency should fall with n. Sampling noise earns one free
  // inversion when the intervals overlap; an increase with disjoint Wilson
  // intervals is always a violation.
  int soft = 0;
  bool ok = true;
  for (std::size_t i = 1; i < report.aggregates.size(); ++i) {
    const AggregateRow& prev = report.aggregates[i - 1];
    const AggregateRow& cur = report.aggregates[i];
    if (cur.failure_frequency <= prev.failure_frequency + 1e-12) continue;
    if (cur.wilson_lo > prev.wilson_hi) {
      ok = false;
    } else if (++soft > 1) {
      ok = false;
    }
  }
  report.monotone_nonincreasing = ok;
  report.middle_hug_fraction = kNaN;
  report.mean_middle_spurious = kNaN;
  report.runtime_seconds = now_seconds() - t0;
  return report;
}

ChiSquareVerdict fluctuation_uniformity(int n, long reps, std::uint64_t seed) {
  if (n < 2) throw InputError("fluctuation check: n must be at least 2");
  if (reps < 10000)
    throw InputError("fluctuation check: need at least 10000 replicates");
  ChiSquareVerdict verdict;
  verdict.counts.assign(static_cast<std::size_t>(n), 0);
  Rng rng(seed);
  std::vector<double> s(static_cast<std::size_t>(n));
  for (long r = 0; r < reps; ++r) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += rng.normal();
      s[static_cast<std::size_t>(k)] = acc;
    }
    const double total = acc;
    int positive = 0;
    // u_n = 0 identically, so k stops at n-1.
    for (int k = 1; k < n; ++k)
      if (s[static_cast<std::size_t>(k) - 1] >
          (static_cast<double>(k) / n) * total)
        ++positive;
    ++verdict.counts[static_cast<std::size_t>(positive)];
  }
  const double expected = static_cast<double>(reps) / n;
  double stat = 0.0;
  for (long c : verdict.counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  verdict.statistic = stat;
  verdict.p_value = chi_square_sf(stat, n - 1);
  verdict.uniform = verdict.p_value >= 0.01;
  return verdict;
}

CrossingVerdict crossing_probability_check(int n, double eps, long reps,
                                           std::uint64_t seed, int threads) {
  if (n < 2) throw InputError("crossing check: n must be at least 2");
  if (!(eps > 0.0 && eps < 0.5))
    throw InputError("crossing check: eps must lie in (0, 0.5)");
  const long flank = static_cast<long>(std::floor(eps * n));
  if (flank < 2)
    throw InputError("crossing check: eps*n must be at least 2");
  if (reps < 1) throw InputError("crossing check: reps must be positive");
  if (reps > std::numeric_limits<int>::max())
    throw InputError("crossing check: reps is too large");
  CrossingVerdict verdict;
  verdict.reps = reps;
  verdict.bound = 1.0 / (2.0 * std::numbers::pi * std::numbers::pi * eps * n);
  if (verdict.bound * static_cast<double>(reps) < 50.0)
    throw ConfigError(
        "crossing check: too few replicates to resolve the bound; increase "
        "reps");
  std::vector<char> hit(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<int>(reps), threads, [&](int rep) {
    Rng rng(seed, static_cast<std::uint64_t>(rep));
    std::vector<double> left(static_cast<std::size_t>(flank));
    std::vector<double> right(static_cast<std::size_t>(flank));
    double acc = 0.0;
    for (int t = 1; t <= n; ++t) {
      acc += rng.normal();
      if (t <= flank) left[static_cast<std::size_t>(t) - 1] = acc;
      if (t >= n - flank + 1)
        right[static_cast<std::size_t>(t - (n - flank + 1))] = acc;
    }
    const double total = acc;
    bool above = true;
    for (long i = 0; i < flank && above; ++i) {
      const double t = static_cast<double>(i + 1);
      if (left[static_cast<std::size_t>(i)] < (t / n) * total) above = false;
    }
    for (long i = 0; i < flank && above; ++i) {
      const double t = static_cast<double>(n - flank + 1 + i);
      if (right[static_cast<std::size_t>(i)] < (t / n) * total) above = false;
    }
    hit[static_cast<std::size_t>(rep)] = above ? 1 : 0;
  });
  long hits = 0;
  for (char h : hit) hits += h;
  verdict.hits = hits;
  verdict.estimate = static_cast<double>(hits) / static_cast<double>(reps);
  verdict.standard_error =
      std::sqrt(std::max(verdict.estimate * (1.0 - verdict.estimate), 0.0) /
                static_cast<double>(reps));
  verdict.passes =
      verdict.estimate >= verdict.bound - 3.0 * verdict.standard_error;
  return verdict;
}

}  // namespace flsa
