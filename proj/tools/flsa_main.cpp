#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "flsa/errors.hpp"
#include "flsa/experiments.hpp"
#include "flsa/extensions.hpp"
#include "flsa/io.hpp"
#include "flsa/lasso.hpp"
#include "flsa/path.hpp"
#include "flsa/solver.hpp"
#include "flsa/types.hpp"
#include "flsa/util.hpp"

namespace {

using namespace flsa;

std::string join_command(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

struct RawInput {
  std::string bytes;
  std::string digest;
};

// Path "-" means stdin. The bytes are kept so the provenance digest and the
// parsed values always come from the same read.
RawInput slurp(const std::string& path) {
  RawInput in;
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    in.bytes = ss.str();
  } else {
    in.bytes = read_file_bytes(path);
  }
  in.digest = fnv1a64_hex(in.bytes.data(), in.bytes.size());
  return in;
}

Signal parse_signal(const RawInput& in) {
  std::istringstream ss(in.bytes);
  return Signal(read_signal_csv(ss));
}

void emit(const Document& doc) { std::cout << doc.dump(2) << '\n'; }

struct DenoiseOpts {
  std::string input = "-";
  double lambda = 0.0;
  double lambda_frac = 0.0;
  bool have_lambda = false;
  bool have_frac = false;
  bool do_polish = false;
  bool want_dual = false;
  std::string format = "json";
};

int run_denoise(const DenoiseOpts& opt, Provenance prov) {
  RawInput in = slurp(opt.input);
  prov.input_digest = in.digest;
  Signal y = parse_signal(in);
  const double lam =
      opt.have_lambda ? opt.lambda : opt.lambda_frac * lambda_max(y);
  Segmentation seg = solve(y, lam);
  KktReport kkt = verify_kkt(y, seg, lam);
  if (!kkt.feasible)
    throw CertificateError("denoise: optimality certificate failed");
  DualCertificate dual = dual_variables(y, expand(seg), lam);
  // Certification happens on the raw minimizer; polish re-averages the
  // levels afterwards (possibly merging segments), so the kkt and dual
  // blocks always describe the solution of the penalized problem.
  Segmentation out = opt.do_polish ? polish(y, seg) : seg;
  if (opt.format == "csv") {
    write_signal_csv(std::cout, expand(out));
    return 0;
  }
  emit(segmentation_document(out, prov, opt.want_dual ? &dual : nullptr,
                             &kkt));
  return 0;
}

int run_lambda_max(const std::string& input) {
  Signal y = parse_signal(slurp(input));
  std::cout << shortest_double(lambda_max(y)) << '\n';
  return 0;
}

int run_path_cmd(const std::string& input, Provenance prov) {
  RawInput in = slurp(input);
  prov.input_digest = in.digest;
  Signal y = parse_signal(in);
  LambdaPath path = trace_path(y);
  NestingReport nest = validate_nesting(path);
  if (!nest.ok)
    throw CertificateError("path: nesting violated at event " +
                           std::to_string(nest.event_index) + ": " +
                           nest.reason);
  emit(path_document(path, prov));
  return 0;
}

int run_variance(const std::string& input, double lam, Provenance prov) {
  RawInput in = slurp(input);
  prov.input_digest = in.digest;
  Signal y = parse_signal(in);
  emit(variance_document(variance_solve(y, lam), prov));
  return 0;
}

int run_trend(const std::string& input, double lam, double tol,
              Provenance prov) {
  RawInput in = slurp(input);
  prov.input_digest = in.digest;
  Signal y = parse_signal(in);
  TrendFit fit = trend_solve(y, lam, tol);
  TrendKktReport rep = trend_verify_kkt(y, fit, lam, tol);
  if (!rep.feasible)
    throw CertificateError("trend: optimality certificate failed");
  emit(trend_document(fit, prov));
  return 0;
}

int run_irrep(int n, const std::vector<int>& knots,
              const std::vector<int>& signs) {
  write_irrep_csv(std::cout, irrep_profile(n, knots, signs));
  return 0;
}

int run_simulate(int n, const std::vector<int>& cps,
                 const std::vector<double>& levels, double noise_sd,
                 std::uint64_t seed) {
  StepModel model;
  model.n = n;
  model.change_points = cps;
  model.levels = levels;
  model.noise_sd = noise_sd;
  model.check();
  if (noise_sd < 0.0) throw InputError("simulate: noise sd must be >= 0");
  write_signal_csv(std::cout, generate(model, seed).values());
  return 0;
}

int run_experiment(const std::string& config_path, std::uint64_t seed,
                   int threads, Provenance prov) {
  std::string bytes = read_file_bytes(config_path);
  prov.input_digest = fnv1a64_hex(bytes.data(), bytes.size());
  std::istringstream ss(bytes);
  ExperimentRequest req = parse_experiment_config(ss);
  McReport report;
  switch (req.kind) {
    case ExperimentRequest::Kind::kExample1:
      report = run_example1(req.reps, seed, threads);
      break;
    case ExperimentRequest::Kind::kExample2:
      report = run_example2(req.reps, seed, threads);
      break;
    case ExperimentRequest::Kind::kSweep:
      req.sweep.seed = seed;
      req.sweep.threads = threads;
      report = run_consistency_sweep(req.sweep);
      break;
  }
  emit(mc_report_document(report, prov));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Exact total-variation denoising and change-point analysis for 1-D "
      "signals"};
  app.require_subcommand(1);

  DenoiseOpts den;
  CLI::App* denoise = app.add_subcommand(
      "denoise", "Piecewise-constant fit with a certified optimum");
  denoise->add_option("input", den.input, "CSV file, or - for stdin");
  CLI::Option* opt_lam =
      denoise->add_option("--lambda", den.lambda, "Penalty value")
          ->check(CLI::NonNegativeNumber);
  CLI::Option* opt_frac =
      denoise
          ->add_option("--lambda-frac", den.lambda_frac,
                       "Penalty as a fraction of lambda-max")
          ->check(CLI::NonNegativeNumber);
  opt_lam->excludes(opt_frac);
  denoise->add_flag("--polish", den.do_polish,
                    "Replace levels by unbiased segment averages");
  denoise->add_flag("--dual", den.want_dual,
                    "Attach the dual vector to the report");
  denoise->add_option("--format", den.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  std::string lm_input = "-";
  CLI::App* lm = app.add_subcommand(
      "lambda-max", "Smallest penalty that collapses the fit to one segment");
  lm->add_option("input", lm_input, "CSV file, or - for stdin");

  std::string path_input = "-";
  CLI::App* pathc = app.add_subcommand(
      "path", "Full solution path over the penalty parameter");
  pathc->add_option("input", path_input, "CSV file, or - for stdin");

  std::string var_input = "-";
  double var_lambda = 0.0;
  CLI::App* var = app.add_subcommand(
      "variance", "Piecewise-constant variance segmentation");
  var->add_option("input", var_input, "CSV file, or - for stdin");
  var->add_option("--lambda", var_lambda, "Penalty value")
      ->required()
      ->check(CLI::NonNegativeNumber);

  std::string trend_input = "-";
  double trend_lambda = 0.0;
  double trend_tol = 1e-8;
  CLI::App* trend = app.add_subcommand(
      "trend", "Piecewise-linear fit penalizing curvature changes");
  trend->add_option("input", trend_input, "CSV file, or - for stdin");
  trend->add_option("--lambda", trend_lambda, "Penalty value")
      ->required()
      ->check(CLI::NonNegativeNumber);
  trend->add_option("--tol", trend_tol, "Certificate tolerance");

  int irrep_n = 0;
  std::vector<int> irrep_knots;
  std::vector<int> irrep_signs;
  CLI::App* irrep = app.add_subcommand(
      "irrep", "Off-support recovery profile for a jump pattern");
  irrep->add_option("--n", irrep_n, "Sample count")->required();
  irrep->add_option("--knots", irrep_knots, "Jump positions, comma separated")
      ->required()
      ->delimiter(',');
  irrep->add_option("--signs", irrep_signs, "Jump signs, comma separated")
      ->required()
      ->delimiter(',');

  int sim_n = 0;
  std::vector<int> sim_cps;
  std::vector<double> sim_levels;
  double sim_noise = 0.0;
  std::uint64_t sim_seed = 0;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Draw a step signal with Gaussian noise");
  sim->add_option("--n", sim_n, "Sample count")->required();
  sim->add_option("--change-points", sim_cps,
                  "Segment starts, comma separated")
      ->delimiter(',');
  sim->add_option("--levels", sim_levels, "Segment levels, comma separated")
      ->required()
      ->delimiter(',');
  sim->add_option("--noise-sd", sim_noise, "Noise standard deviation");
  sim->add_option("--seed", sim_seed, "RNG seed")->required();

  std::string exp_config;
  std::uint64_t exp_seed = 0;
  int exp_threads = 1;
  CLI::App* exp = app.add_subcommand(
      "experiment", "Run a replicated study from a config file");
  exp->add_option("config", exp_config, "Config file (key = value lines)")
      ->required();
  exp->add_option("--seed", exp_seed, "RNG seed")->required();
  exp->add_option("--threads", exp_threads, "Worker thread count")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Provenance prov;
  prov.command = join_command(argc, argv);

  try {
    if (app.got_subcommand(denoise)) {
      den.have_lambda = opt_lam->count() > 0;
      den.have_frac = opt_frac->count() > 0;
      if (!den.have_lambda && !den.have_frac)
        throw InputError("denoise: pass exactly one of --lambda or --lambda-frac");
      return run_denoise(den, prov);
    }
    if (app.got_subcommand(lm)) return run_lambda_max(lm_input);
    if (app.got_subcommand(pathc)) return run_path_cmd(path_input, prov);
    if (app.got_subcommand(var)) return run_variance(var_input, var_lambda, prov);
    if (app.got_subcommand(trend))
      return run_trend(trend_input, trend_lambda, trend_tol, prov);
    if (app.got_subcommand(irrep))
      return run_irrep(irrep_n, irrep_knots, irrep_signs);
    if (app.got_subcommand(sim)) {
      prov.has_seed = true;
      prov.seed = sim_seed;
      return run_simulate(sim_n, sim_cps, sim_levels, sim_noise, sim_seed);
    }
    if (app.got_subcommand(exp)) {
      prov.has_seed = true;
      prov.seed = exp_seed;
      return run_experiment(exp_config, exp_seed, exp_threads, prov);
    }
  } catch (const CertificateError& e) {
    std::cerr << "flsa: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "flsa: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "flsa: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "flsa: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "flsa: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
