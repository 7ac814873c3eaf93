#include <CLI11.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "flsa/errors.hpp"
#include "flsa/experiments.hpp"
#include "flsa/extensions.hpp"
#include "flsa/lasso.hpp"
#include "flsa/path.hpp"
#include "flsa/rng.hpp"
#include "flsa/solver.hpp"
#include "flsa/types.hpp"
#include "flsa/util.hpp"

// Release gate. Every criterion prints one [PASS]/[FAIL] line with the
// measured quantity next to its frozen threshold; thresholds that depend on
// sampling variability were frozen from pilot runs at the recorded seeds.

namespace {

using namespace flsa;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

std::vector<int> draw_positions(Rng& rng, int n, int k) {
  std::vector<int> ks;
  while (static_cast<int>(ks.size()) < k) {
    int p = 1 + static_cast<int>(rng.uniform01() * (n - 1));
    p = std::min(p, n - 1);
    if (std::find(ks.begin(), ks.end(), p) == ks.end()) ks.push_back(p);
  }
  std::sort(ks.begin(), ks.end());
  return ks;
}

// Step signal with up to five jumps plus Gaussian noise, drawn entirely from
// the per-item stream so criteria stay thread-invariant.
std::vector<double> noisy_step(Rng& rng, int n, double sd_lo, double sd_hi,
                               double base_lo = -2.0, double base_hi = 2.0,
                               bool keep_positive = false) {
  int k = std::min(static_cast<int>(rng.uniform01() * 6.0), (n - 1) / 2);
  std::vector<int> cps = draw_positions(rng, n, k);
  double level = base_lo + (base_hi - base_lo) * rng.uniform01();
  std::vector<double> levels{level};
  for (int j = 0; j < k; ++j) {
    double jump = (0.5 + 1.5 * rng.uniform01()) *
                  (rng.uniform01() < 0.5 ? -1.0 : 1.0);
    if (keep_positive && level + jump < 0.6) jump = std::abs(jump);
    level += jump;
    levels.push_back(level);
  }
  double sd = sd_lo + (sd_hi - sd_lo) * rng.uniform01();
  std::vector<double> y(static_cast<std::size_t>(n));
  int seg = 0;
  for (int t = 0; t < n; ++t) {
    while (seg < k && t >= cps[static_cast<std::size_t>(seg)]) ++seg;
    y[static_cast<std::size_t>(t)] =
        levels[static_cast<std::size_t>(seg)] + sd * rng.normal();
  }
  return y;
}

Outcome criterion_certificates(int threads) {
  const int instances = 250;
  std::vector<int> bad(instances, 0);
  long total = 0;
  std::vector<int> counts(instances, 0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(4101, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 3991.0);
    Signal y(noisy_step(rng, n, 0.3, 1.2));
    double lm = lambda_max(y);
    for (double lam : {0.0, lm / 10.0, lm / 3.0, lm, 2.0 * lm}) {
      Segmentation seg = solve(y, lam);
      KktReport rep = verify_kkt(y, seg, lam, 1e-8);
      if (!rep.feasible) ++bad[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(i)];
    }
  });
  int failures = 0;
  for (int b : bad) failures += b;
  for (int c : counts) total += c;
  Outcome out;
  out.pass = failures == 0 && total >= 1000;
  out.detail = std::to_string(total) + " certificates at tol 1e-8, " +
               std::to_string(failures) + " infeasible";
  return out;
}

Outcome criterion_oracle(int threads) {
  const int instances = 1000;
  std::vector<double> diffs(instances, 0.0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(4202, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 191.0);
    Signal y(noisy_step(rng, n, 0.2, 1.0));
    double lam = rng.uniform01() * 1.1 * lambda_max(y);
    std::vector<double> a = expand(solve(y, lam));
    std::vector<double> b = expand(oracle_solve(y, lam, 1e-12));
    double d = 0.0;
    for (int t = 0; t < n; ++t)
      d = std::max(d, std::abs(a[static_cast<std::size_t>(t)] -
                               b[static_cast<std::size_t>(t)]));
    diffs[static_cast<std::size_t>(i)] = d;
  });
  double worst = *std::max_element(diffs.begin(), diffs.end());
  Outcome out;
  out.pass = worst <= 1e-6;
  out.detail = std::to_string(instances) +
               " instances, worst sup-norm gap " + fmt(worst, 3) + " <= 1e-6";
  return out;
}

Outcome criterion_collapse_threshold(int threads) {
  const int instances = 500;
  std::vector<int> single_ok(instances, 0);
  std::vector<int> multi_ok(instances, 0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(4303, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 991.0);
    Signal y(noisy_step(rng, n, 0.3, 1.2));
    double lm = lambda_max(y);
    if (lm <= 0.0) return;
    single_ok[static_cast<std::size_t>(i)] =
        solve(y, lm * (1.0 + 1e-6)).num_segments() == 1;
    multi_ok[static_cast<std::size_t>(i)] =
        solve(y, lm * (1.0 - 1e-3)).num_segments() > 1;
  });
  int singles = 0;
  int multis = 0;
  for (int i = 0; i < instances; ++i) {
    singles += single_ok[static_cast<std::size_t>(i)];
    multis += multi_ok[static_cast<std::size_t>(i)];
  }
  Outcome out;
  double multi_rate = static_cast<double>(multis) / instances;
  out.pass = singles == instances && multi_rate >= 0.95;
  out.detail = "above: " + std::to_string(singles) + "/" +
               std::to_string(instances) + " single-segment; below: " +
               fmt(multi_rate, 3) + " multi-segment >= 0.95";
  return out;
}

Outcome criterion_nesting(int threads) {
  const int instances = 1000;
  std::vector<int> ok(instances, 0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(4404, static_cast<std::uint64_t>(i));
    int n = 2 + static_cast<int>(rng.uniform01() * 99.0);
    Signal y(noisy_step(rng, n, 0.2, 1.5));
    LambdaPath path = trace_path(y);
    ok[static_cast<std::size_t>(i)] = validate_nesting(path).ok;
  });
  int good = 0;
  for (int v : ok) good += v;
  Outcome out;
  out.pass = good == instances;
  out.detail = std::to_string(good) + "/" + std::to_string(instances) +
               " traced paths nest";
  return out;
}

Outcome criterion_segment_means(int threads) {
  const int instances = 500;
  std::vector<double> diffs(instances, 0.0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(4505, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 991.0);
    Signal y(noisy_step(rng, n, 0.2, 1.0));
    double lam = rng.uniform01() * 0.9 * lambda_max(y);
    Segmentation seg = solve(y, lam);
    std::vector<double> closed =
        segment_means(y, seg.change_points, seg.jump_signs(), lam);
    double d = 0.0;
    for (std::size_t s = 0; s < closed.size(); ++s)
      d = std::max(d, std::abs(closed[s] - seg.levels[s]));
    diffs[static_cast<std::size_t>(i)] = d;
  });
  double worst = *std::max_element(diffs.begin(), diffs.end());
  Outcome out;
  out.pass = worst <= 1e-10;
  out.detail = std::to_string(instances) + " instances, worst level gap " +
               fmt(worst, 3) + " <= 1e-10";
  return out;
}

Outcome criterion_profile(int threads) {
  const int draws = 200;
  std::vector<double> diffs(draws, 0.0);
  parallel_for(draws, threads, [&](int i) {
    Rng rng(4606, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 191.0);
    int k = 1 + static_cast<int>(rng.uniform01() * 5.0);
    k = std::min(k, (n - 1) / 3 + 1);
    std::vector<int> knots = draw_positions(rng, n, k);
    std::vector<int> signs;
    for (int j = 0; j < k; ++j)
      signs.push_back(rng.uniform01() < 0.5 ? -1 : 1);
    IrrepProfile prof = irrep_profile(n, knots, signs);

    Eigen::MatrixXd C = normal_matrix(n);
    Eigen::MatrixXd ckk(k, k);
    Eigen::VectorXd s(k);
    for (int a = 0; a < k; ++a) {
      s(a) = signs[static_cast<std::size_t>(a)];
      for (int b = 0; b < k; ++b)
        ckk(a, b) = C(knots[static_cast<std::size_t>(a)] - 1,
                      knots[static_cast<std::size_t>(b)] - 1);
    }
    Eigen::VectorXd x = ckk.ldlt().solve(s);
    double d = 0.0;
    for (std::size_t j = 0; j < prof.off_indices.size(); ++j) {
      double dense = 0.0;
      for (int a = 0; a < k; ++a)
        dense += C(prof.off_indices[j] - 1,
                   knots[static_cast<std::size_t>(a)] - 1) *
                 x(a);
      d = std::max(d, std::abs(dense - prof.off_values[j]));
    }
    diffs[static_cast<std::size_t>(i)] = d;
  });
  double worst = *std::max_element(diffs.begin(), diffs.end());

  // Same-sign staircase patterns: the profile is identically one strictly
  // between the first and last knot.
  double stair_worst = 0.0;
  Rng rng(46060);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 20 + static_cast<int>(rng.uniform01() * 181.0);
    int k = 2 + static_cast<int>(rng.uniform01() * 4.0);
    std::vector<int> knots;
    for (int j = 1; j <= k; ++j) knots.push_back(j * n / (k + 1));
    std::vector<int> signs(static_cast<std::size_t>(k), 1);
    IrrepProfile prof = irrep_profile(n, knots, signs);
    for (int t = knots.front(); t <= knots.back(); ++t)
      stair_worst = std::max(stair_worst, std::abs(prof.value_at(t) - 1.0));
  }
  Outcome out;
  out.pass = worst <= 1e-9 && stair_worst <= 1e-9;
  out.detail = std::to_string(draws) + " draws vs dense algebra, worst gap " +
               fmt(worst, 3) + "; staircase plateau gap " +
               fmt(stair_worst, 3) + " (both <= 1e-9)";
  return out;
}

Outcome criterion_plateau_recovery(int threads) {
  McReport rep = run_example1(200, 101, threads);
  double success = 1.0 - rep.aggregates.front().failure_frequency;
  Outcome out;
  out.pass = success >= 0.65;
  out.detail = "recovery frequency " + fmt(success, 3) +
               " >= 0.65 over 200 replicates (threshold frozen from pilot "
               "runs at this protocol)";
  return out;
}

Outcome criterion_staircase_failure(int threads) {
  McReport rep = run_example2(200, 202, threads);
  double min_fail = 1.0;
  int grid_rows = 0;
  for (const AggregateRow& row : rep.aggregates) {
    if (row.grid_index < 0) continue;
    ++grid_rows;
    min_fail = std::min(min_fail, row.failure_frequency);
  }
  Outcome out;
  out.pass = grid_rows == 50 && min_fail >= 0.5;
  out.detail = "minimum failure frequency across " +
               std::to_string(grid_rows) + " grid penalties " +
               fmt(min_fail, 3) + " >= 0.5";
  return out;
}

Outcome criterion_consistency_sweep(int threads) {
  StepModel tmpl;
  tmpl.n = 1000;
  tmpl.change_points = {333, 666};
  tmpl.levels = {1.0, 2.0, 1.0};
  tmpl.noise_sd = 1.0;
  StepModel clean = tmpl;
  clean.noise_sd = 0.0;
  ExperimentConfig cfg;
  cfg.truth = tmpl;
  cfg.n_values = {250, 500, 1000, 2000, 4000};
  cfg.rule.kind = LambdaRule::Kind::kPowerOfN;
  // Scale-matched at the middle sweep size: the power rule reproduces the
  // one-third collapse fraction at n = 1000.
  cfg.rule.value =
      lambda_max(generate(clean, 1)) / 3.0 / std::pow(1000.0, 0.75);
  cfg.rule.exponent = 0.75;
  cfg.reps = 200;
  cfg.seed = 11;
  cfg.threads = threads;
  McReport rep = run_consistency_sweep(cfg);
  double front = rep.aggregates.front().failure_frequency;
  double back = rep.aggregates.back().failure_frequency;
  double max_diag = 0.0;
  double min_diag = 1e300;
  bool finite = true;
  for (const AggregateRow& row : rep.aggregates) {
    if (!std::isfinite(row.rate_diagnostic)) finite = false;
    max_diag = std::max(max_diag, row.rate_diagnostic);
    min_diag = std::min(min_diag, row.rate_diagnostic);
  }
  Outcome out;
  out.pass = rep.monotone_nonincreasing && finite && min_diag > 0.0 &&
             max_diag <= 0.1;
  out.detail = "failure " + fmt(front, 3) + " -> " + fmt(back, 3) +
               " non-increasing over n=250..4000; rate diagnostic in (" +
               fmt(min_diag, 3) + ", " + fmt(max_diag, 3) + "] <= 0.1";
  return out;
}

Outcome criterion_fluctuation(int) {
  ChiSquareVerdict v = fluctuation_uniformity(5, 100000, 5010);
  double lo = 1.0;
  double hi = 0.0;
  long total = 0;
  for (long c : v.counts) total += c;
  for (long c : v.counts) {
    double f = static_cast<double>(c) / static_cast<double>(total);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  Outcome out;
  out.pass = v.uniform && v.p_value >= 0.01 && lo >= 0.19 && hi <= 0.21;
  out.detail = "cell frequencies in [" + fmt(lo, 3) + ", " + fmt(hi, 3) +
               "] within [0.19, 0.21], chi-square p " + fmt(v.p_value, 3) +
               " >= 0.01";
  return out;
}

Outcome criterion_crossing(int threads) {
  CrossingVerdict v = crossing_probability_check(500, 0.02, 1000000, 5011,
                                                 threads);
  Outcome out;
  out.pass = v.passes;
  out.detail = "estimate " + fmt(v.estimate, 4) + " >= bound " +
               fmt(v.bound, 4) + " - 3 SE (" + fmt(3.0 * v.standard_error, 2) +
               ")";
  return out;
}

Outcome criterion_variance(int threads) {
  const int instances = 500;
  std::vector<int> ok(instances, 0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(5012, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 491.0);
    Signal y(noisy_step(rng, n, 0.1, 0.4, 1.0, 3.0, true));
    std::vector<double> sq(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) sq[static_cast<std::size_t>(t)] = y[t] * y[t];
    Signal ysq(sq);
    double lam = rng.uniform01() * 0.5 * lambda_max(ysq);
    VarianceSegmentation a = variance_solve(y, lam);
    Segmentation b = solve(ysq, lam);
    bool same = a.change_points == b.change_points &&
                a.levels.size() == b.levels.size();
    if (same)
      for (std::size_t s = 0; s < a.levels.size(); ++s)
        if (a.levels[s] != b.levels[s]) same = false;
    ok[static_cast<std::size_t>(i)] = same;
  });
  int good = 0;
  for (int v : ok) good += v;
  Outcome out;
  out.pass = good == instances;
  out.detail = std::to_string(good) + "/" + std::to_string(instances) +
               " bit-exact matches against the squared-data mean filter";
  return out;
}

Outcome criterion_trend(int threads) {
  const int instances = 500;
  std::vector<int> ok(instances, 0);
  parallel_for(instances, threads, [&](int i) {
    Rng rng(5013, static_cast<std::uint64_t>(i));
    int n = 10 + static_cast<int>(rng.uniform01() * 91.0);
    Signal y(noisy_step(rng, n, 0.3, 1.0));
    double lam = std::pow(10.0, -1.5 + 3.0 * rng.uniform01());
    try {
      TrendFit fit = trend_solve(y, lam, 1e-6);
      ok[static_cast<std::size_t>(i)] =
          trend_verify_kkt(y, fit, lam, 1e-6).feasible;
    } catch (const ConvergenceError&) {
      ok[static_cast<std::size_t>(i)] = 0;
    }
  });
  int good = 0;
  for (int v : ok) good += v;

  double affine_worst = 0.0;
  Rng rng(50130);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 10 + static_cast<int>(rng.uniform01() * 91.0);
    double a = -2.0 + 4.0 * rng.uniform01();
    double b = -1.0 + 2.0 * rng.uniform01();
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) v[static_cast<std::size_t>(t)] = a + b * t;
    Signal y(v);
    double scale = std::max(1.0, std::abs(a) + std::abs(b) * n);
    for (double lam : {0.1, 1.0, 10.0}) {
      TrendFit fit = trend_solve(y, lam, 1e-8);
      for (int t = 0; t < n; ++t)
        affine_worst = std::max(
            affine_worst,
            std::abs(fit.fitted[static_cast<std::size_t>(t)] - y[t]) / scale);
    }
  }
  Outcome out;
  out.pass = good == instances && affine_worst <= 1e-9;
  out.detail = std::to_string(good) + "/" + std::to_string(instances) +
               " certified at tol 1e-6; affine drift " + fmt(affine_worst, 3) +
               " <= 1e-9 of scale";
  return out;
}

struct Criterion {
  int id;
  const char* label;
  double time_limit_seconds;
  std::function<Outcome(int)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "optimality certificates across the penalty range", 60.0,
       criterion_certificates},
      {2, "agreement with the dual-ascent reference solver", 0.0,
       criterion_oracle},
      {3, "collapse-threshold semantics", 0.0, criterion_collapse_threshold},
      {4, "penalty-path nesting", 0.0, criterion_nesting},
      {5, "closed-form segment levels", 0.0, criterion_segment_means},
      {6, "off-support profile vs dense algebra", 0.0, criterion_profile},
      {7, "plateau recovery frequency", 300.0, criterion_plateau_recovery},
      {8, "staircase failure across the penalty grid", 0.0,
       criterion_staircase_failure},
      {9, "failure decay with sample size", 0.0, criterion_consistency_sweep},
      {10, "centered-sum positive-count uniformity", 0.0,
       criterion_fluctuation},
      {11, "flank-crossing probability lower bound", 0.0, criterion_crossing},
      {12, "variance filter equals squared-data mean filter", 0.0,
       criterion_variance},
      {13, "trend certificates and affine fixed points", 0.0, criterion_trend},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Release acceptance checks"};
  int which = 0;
  int threads = 4;
  app.add_option("--criterion", which, "Criterion number, 0 for all")
      ->check(CLI::Range(0, 13));
  app.add_option("--threads", threads, "Worker thread count")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const Criterion& c : criteria()) {
    if (which != 0 && c.id != which) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(threads);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("aborted: ") + e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    bool in_time = c.time_limit_seconds <= 0.0 ||
                   elapsed < c.time_limit_seconds;
    bool pass = out.pass && in_time;
    all_pass = all_pass && pass;
    std::ostringstream line;
    line << (pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": "
         << c.label << " -- " << out.detail;
    if (c.time_limit_seconds > 0.0)
      line << " -- " << fmt(elapsed, 3) << " s < "
           << fmt(c.time_limit_seconds, 3) << " s";
    else
      line << " -- " << fmt(elapsed, 3) << " s";
    std::cout << line.str() << std::endl;
  }
  return all_pass ? 0 : 1;
}
