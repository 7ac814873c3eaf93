#include "flsa/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#include "flsa/errors.hpp"
#include "flsa/util.hpp"

namespace flsa {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

// from_chars, but tolerating a leading '+' and insisting the whole token is
// consumed. Finite values only.
bool parse_double_token(std::string_view tok, double* out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), last, *out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(*out);
}

bool parse_long_token(std::string_view tok, long* out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), last, *out);
  return res.ec == std::errc() && res.ptr == last;
}

Document provenance_json(const Provenance& p) {
  Document j;
  j["command"] = p.command;
  if (p.has_seed) j["seed"] = p.seed;
  if (!p.input_digest.empty()) j["input_digest"] = p.input_digest;
  return j;
}

}  // namespace

std::vector<double> read_signal_csv(std::istream& in) {
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view tok = trim(line);
    if (tok.empty()) continue;
    double v = 0.0;
    if (parse_double_token(tok, &v)) {
      values.push_back(v);
      header_allowed = false;
      continue;
    }
    if (header_allowed) {
      header_allowed = false;
      continue;
    }
    throw InputError("csv: line " + std::to_string(line_no) +
                     " is not a number");
  }
  if (values.empty()) throw InputError("csv: no data rows");
  return values;
}

std::vector<double> read_signal_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  return read_signal_csv(in);
}

void write_signal_csv(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) out << shortest_double(v) << '\n';
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Document segmentation_document(const Segmentation& seg, const Provenance& prov,
                               const DualCertificate* dual,
                               const KktReport* kkt) {
  Document j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "segmentation";
  j["n"] = seg.n;
  j["lambda"] = seg.lambda;
  j["change_points"] = seg.change_points;
  j["levels"] = seg.levels;
  if (dual) j["dual"] = dual->z;
  if (kkt) {
    Document k;
    k["feasible"] = kkt->feasible;
    k["box_residual"] = kkt->box_residual;
    k["stationarity_residual"] = kkt->stationarity_residual;
    k["terminal_residual"] = kkt->terminal_residual;
    k["sign_mismatches"] = kkt->active_set_mismatch.size();
    k["tol"] = kkt->tol;
    j["kkt"] = k;
  }
  j["provenance"] = provenance_json(prov);
  return j;
}

Segmentation segmentation_from_document(const Document& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw InputError("document: unsupported schema_version");
    if (doc.at("kind").get<std::string>() != "segmentation")
      throw InputError("document: kind is not 'segmentation'");
    Segmentation seg;
    seg.n = doc.at("n").get<int>();
    seg.lambda = doc.at("lambda").get<double>();
    seg.change_points = doc.at("change_points").get<std::vector<int>>();
    seg.levels = doc.at("levels").get<std::vector<double>>();
    seg.check();
    return seg;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("document: ") + e.what());
  }
}

Document variance_document(const VarianceSegmentation& seg,
                           const Provenance& prov) {
  Document j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "variance";
  j["n"] = seg.n;
  j["lambda"] = seg.lambda;
  j["change_points"] = seg.change_points;
  j["levels"] = seg.levels;
  j["provenance"] = provenance_json(prov);
  return j;
}

Document trend_document(const TrendFit& fit, const Provenance& prov) {
  Document j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "trend";
  j["n"] = static_cast<int>(fit.fitted.size());
  j["lambda"] = fit.lambda;
  j["fitted"] = fit.fitted;
  j["kink_points"] = fit.kink_points;
  j["dual"] = fit.dual;
  {
    Document k;
    k["feasible"] = fit.kkt_residuals.feasible;
    k["box_residual"] = fit.kkt_residuals.box_residual;
    k["coupling_residual"] = fit.kkt_residuals.coupling_residual;
    k["interior_curvature"] = fit.kkt_residuals.interior_curvature;
    k["end_residual"] = fit.kkt_residuals.end_residual;
    k["first_violation"] = fit.kkt_residuals.first_violation;
    k["tol"] = fit.kkt_residuals.tol;
    j["kkt"] = k;
  }
  j["provenance"] = provenance_json(prov);
  return j;
}

Document path_document(const LambdaPath& path, const Provenance& prov) {
  Document j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "path";
  j["n"] = path.events.empty() ? 0 : path.events.front().seg.n;
  Document events = Document::array();
  for (const PathEvent& ev : path.events) {
    Document e;
    e["lambda"] = ev.lambda;
    e["change_points"] = ev.seg.change_points;
    e["levels"] = ev.seg.levels;
    events.push_back(e);
  }
  j["events"] = events;
  j["provenance"] = provenance_json(prov);
  return j;
}

namespace {

// Store NaN as an explicit null so documents equal their own reparse.
Document double_or_null(double x) {
  if (std::isnan(x)) return nullptr;
  return x;
}

}  // namespace

Document mc_report_document(const McReport& report, const Provenance& prov) {
  Document j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "mc_report";
  Document res;
  res["experiment"] = report.experiment;
  res["seed"] = report.seed;
  res["eps"] = report.eps;
  Document aggs = Document::array();
  for (const AggregateRow& row : report.aggregates) {
    Document a;
    a["n"] = row.n;
    a["grid_index"] = row.grid_index;
    a["mean_lambda"] = row.mean_lambda;
    a["reps"] = row.reps;
    a["failures"] = row.failures;
    a["failure_frequency"] = row.failure_frequency;
    a["wilson_lo"] = row.wilson_lo;
    a["wilson_hi"] = row.wilson_hi;
    a["mean_change_point_count"] = row.mean_change_point_count;
    a["mean_spurious_count"] = row.mean_spurious_count;
    a["rate_diagnostic"] = double_or_null(row.rate_diagnostic);
    aggs.push_back(std::move(a));
  }
  res["aggregates"] = std::move(aggs);
  Document recs = Document::array();
  for (const ReplicateRecord& rec : report.records) {
    Document d;
    d["n"] = rec.n;
    d["lambda"] = rec.lambda;
    d["change_points"] = rec.change_points;
    d["consistent"] = rec.consistent;
    recs.push_back(std::move(d));
  }
  res["records"] = std::move(recs);
  res["middle_hug_fraction"] = double_or_null(report.middle_hug_fraction);
  res["mean_middle_spurious"] = double_or_null(report.mean_middle_spurious);
  res["monotone_nonincreasing"] = report.monotone_nonincreasing;
  j["results"] = std::move(res);
  Document diag;
  diag["runtime_seconds"] = report.runtime_seconds;
  j["diagnostics"] = std::move(diag);
  j["provenance"] = provenance_json(prov);
  return j;
}

void write_irrep_csv(std::ostream& out, const IrrepProfile& profile) {
  out << "position,value\n";
  for (int t = 1; t < profile.n_samples; ++t)
    out << t << ',' << shortest_double(profile.value_at(t)) << '\n';
}

namespace {

struct RawEntry {
  std::string value;
  long line = 0;
  bool used = false;
};

class ConfigMap {
 public:
  explicit ConfigMap(std::istream& in) {
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string_view sv = line;
      const auto hash = sv.find('#');
      if (hash != std::string_view::npos) sv = sv.substr(0, hash);
      sv = trim(sv);
      if (sv.empty()) continue;
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      std::string key(trim(sv.substr(0, eq)));
      std::string value(trim(sv.substr(eq + 1)));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty key");
      if (entries_.count(key))
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
      entries_[key] = RawEntry{value, line_no, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const std::string& require(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError("config: missing required key '" + key + "'");
    it->second.used = true;
    return it->second.value;
  }

  const std::string* optional(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second.value;
  }

  void reject_unused() const {
    for (const auto& [key, entry] : entries_)
      if (!entry.used)
        throw ConfigError("config line " + std::to_string(entry.line) +
                          ": unknown key '" + key + "'");
  }

 private:
  std::map<std::string, RawEntry> entries_;
};

double config_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  if (!parse_double_token(trim(text), &v))
    throw ConfigError("config: key '" + key + "' is not a finite number");
  return v;
}

long config_long(const std::string& key, const std::string& text) {
  long v = 0;
  if (!parse_long_token(trim(text), &v))
    throw ConfigError("config: key '" + key + "' is not an integer");
  return v;
}

int config_int(const std::string& key, const std::string& text) {
  const long v = config_long(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config: key '" + key + "' is out of range");
  return static_cast<int>(v);
}

std::vector<std::string> split_list(const std::string& key,
                                    const std::string& text) {
  std::vector<std::string> parts;
  std::string_view sv = text;
  while (true) {
    const auto comma = sv.find(',');
    std::string_view tok = trim(sv.substr(0, comma));
    if (tok.empty())
      throw ConfigError("config: key '" + key + "' has an empty list entry");
    parts.emplace_back(tok);
    if (comma == std::string_view::npos) break;
    sv = sv.substr(comma + 1);
  }
  return parts;
}

std::vector<int> config_int_list(const std::string& key,
                                 const std::string& text) {
  std::vector<int> out;
  for (const std::string& tok : split_list(key, text))
    out.push_back(config_int(key, tok));
  return out;
}

std::vector<double> config_double_list(const std::string& key,
                                       const std::string& text) {
  std::vector<double> out;
  for (const std::string& tok : split_list(key, text))
    out.push_back(config_double(key, tok));
  return out;
}

}  // namespace

ExperimentRequest parse_experiment_config(std::istream& in) {
  ConfigMap map(in);
  ExperimentRequest req;
  const std::string experiment = map.require("experiment");
  const int reps = config_int("reps", map.require("reps"));
  if (reps < 1) throw ConfigError("config: reps must be at least 1");
  req.reps = reps;

  if (experiment == "example1" || experiment == "example2") {
    req.kind = experiment == "example1" ? ExperimentRequest::Kind::kExample1
                                        : ExperimentRequest::Kind::kExample2;
    map.reject_unused();
    return req;
  }
  if (experiment != "sweep")
    throw ConfigError("config: experiment must be example1, example2, or sweep");

  req.kind = ExperimentRequest::Kind::kSweep;
  ExperimentConfig& cfg = req.sweep;
  cfg.reps = reps;
  cfg.eps = config_double("eps", map.require("eps"));
  cfg.n_values = config_int_list("n_values", map.require("n_values"));
  cfg.truth.n = config_int("truth_n", map.require("truth_n"));
  cfg.truth.change_points =
      config_int_list("truth_change_points", map.require("truth_change_points"));
  cfg.truth.levels =
      config_double_list("truth_levels", map.require("truth_levels"));
  cfg.truth.noise_sd =
      config_double("truth_noise_sd", map.require("truth_noise_sd"));

  const std::string rule = map.require("lambda_rule");
  cfg.rule.value = config_double("lambda_value", map.require("lambda_value"));
  if (rule == "fixed") {
    cfg.rule.kind = LambdaRule::Kind::kFixed;
  } else if (rule == "fraction") {
    cfg.rule.kind = LambdaRule::Kind::kFractionOfLambdaMax;
  } else if (rule == "power") {
    cfg.rule.kind = LambdaRule::Kind::kPowerOfN;
    cfg.rule.exponent =
        config_double("lambda_exponent", map.require("lambda_exponent"));
  } else {
    throw ConfigError("config: lambda_rule must be fixed, fraction, or power");
  }

  if (const std::string* v = map.optional("max_change_points"))
    cfg.max_change_points = config_int("max_change_points", *v);
  if (const std::string* v = map.optional("min_segment_fraction"))
    cfg.min_segment_fraction = config_double("min_segment_fraction", *v);
  if (const std::string* v = map.optional("min_jump"))
    cfg.min_jump = config_double("min_jump", *v);
  if (const std::string* v = map.optional("max_jump"))
    cfg.max_jump = config_double("max_jump", *v);

  map.reject_unused();
  return req;
}

ExperimentRequest parse_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  return parse_experiment_config(in);
}

}  // namespace flsa
