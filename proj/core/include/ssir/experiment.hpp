#pragma once

#include <optional>
#include <string>

#include "ssir/metrics.hpp"
#include "ssir/moments.hpp"
#include "ssir/reweight.hpp"
#include "ssir/simulate.hpp"
#include "ssir/tuning.hpp"

namespace ssir {

enum class Variant { kFixedL, kBic, kAic };

std::string to_string(ModelKind kind);
std::string to_string(CovKind kind);
std::string to_string(Variant variant);
ModelKind model_from_string(const std::string& name);
CovKind cov_from_string(const std::string& name);
Variant variant_from_string(const std::string& name);

struct Scenario {
  ModelKind model = ModelKind::kI;
  CovKind cov = CovKind::kIdentity;
  int n = 100;
  int p = 200;
};

struct ExperimentSpec {
  std::vector<Scenario> scenarios;
  std::vector<Variant> variants{Variant::kFixedL};
  int replicates = 100;
  Rp2Params params;  // params.l is the fixed-l variant's support size
  int H = 10;
  KernelEstimator estimator = KernelEstimator::kSliceMeans;
  int s = 5;  // true support size of the simulated coefficients
  std::uint64_t seed = 0;
};

struct ReplicateRecord {
  int scenario = 0;
  Variant variant = Variant::kFixedL;
  int replicate = 0;
  bool failed = false;
  double correlation = 0.0;
  bool signal = false;
  bool signal_exact = false;
  int chosen_l = 0;
  double wall_ms = 0.0;
};

struct ResultRow {
  Scenario scenario;
  Variant variant = Variant::kFixedL;
  int replicates = 0;
  int failures = 0;
  double mean_correlation = 0.0;
  double se_correlation = 0.0;  // NaN when fewer than 2 usable replicates
  double signal_rate = 0.0;       // containment
  double signal_exact_rate = 0.0; // set equality
  double mean_chosen_l = 0.0;
  double mean_wall_ms = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;          // scenario-major, variant-minor order
  std::vector<ReplicateRecord> records; // only when keep_records was set
};

// Runs the full grid. Replicate streams are derived from (seed, scenario
// signature, replicate index), so results do not depend on the order of the
// scenario list, the variant list, or the thread count. Tuned variants
// share the two weight passes with the fixed-l variant within a replicate;
// only the final support/basis step differs, which is exactly what a
// standalone run with that l would produce.
ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 1,
                                bool keep_records = false);

// Fixed TSV header and row serialization used by the command line tool and
// documented in the README. Timing columns land at the end so they can be
// stripped for byte-level comparisons.
std::string result_tsv_header();
std::string result_tsv_row(const ResultRow& row);

}  // namespace ssir
