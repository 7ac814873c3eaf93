#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsa/experiments.hpp"
#include "flsa/extensions.hpp"
#include "flsa/lasso.hpp"
#include "flsa/path.hpp"
#include "flsa/solver.hpp"
#include "flsa/types.hpp"

namespace flsa {

// Insertion-ordered so serialized reports are byte-stable across runs.
using Document = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// One numeric value per line; a single leading non-numeric line is treated
// as a header and skipped. Any other non-numeric row raises InputError with
// its 1-based line number. CRLF input is accepted.
std::vector<double> read_signal_csv(std::istream& in);
std::vector<double> read_signal_csv_file(const std::string& path);

// Plain headerless column, one shortest-round-trip value per line.
void write_signal_csv(std::ostream& out, const std::vector<double>& values);

// Whole-file read used for provenance digests; raises InputError when the
// file cannot be opened.
std::string read_file_bytes(const std::string& path);

struct Provenance {
  std::string command;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string input_digest;  // fnv1a64 hex of the input bytes, empty if none
};

Document segmentation_document(const Segmentation& seg, const Provenance& prov,
                               const DualCertificate* dual = nullptr,
                               const KktReport* kkt = nullptr);
// Inverse of segmentation_document for the core fields; validates the
// schema version, the document kind, and the structural invariants.
Segmentation segmentation_from_document(const Document& doc);

Document variance_document(const VarianceSegmentation& seg,
                           const Provenance& prov);
Document trend_document(const TrendFit& fit, const Provenance& prov);
Document path_document(const LambdaPath& path, const Provenance& prov);

// Deterministic results live under "results"; wall-clock time goes to
// "diagnostics" so identical runs produce identical results subtrees.
Document mc_report_document(const McReport& report, const Provenance& prov);

// position,value rows for every interior position 1..n-1.
void write_irrep_csv(std::ostream& out, const IrrepProfile& profile);

// Declarative experiment request: key = value lines, '#' comments.
//   experiment = example1 | example2 | sweep     (always required)
//   reps = <positive integer>                    (always required)
// The canonical examples accept nothing else; a sweep additionally takes
//   eps, n_values, truth_n, truth_change_points, truth_levels,
//   truth_noise_sd, lambda_rule = fixed | fraction | power, lambda_value,
//   lambda_exponent (power rule only), and optional limit overrides
//   max_change_points, min_segment_fraction, min_jump, max_jump.
// Unknown, duplicate, missing, or malformed keys raise ConfigError with the
// offending line or key named.
struct ExperimentRequest {
  enum class Kind { kExample1, kExample2, kSweep };
  Kind kind = Kind::kExample1;
  int reps = 0;
  ExperimentConfig sweep;  // populated only for kSweep
};

ExperimentRequest parse_experiment_config(std::istream& in);
ExperimentRequest parse_experiment_config_file(const std::string& path);

}  // namespace flsa
