#pragma once

#include "msna/data.hpp"
#include "msna/optimizer.hpp"
#include "msna/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msna {

// Scalar expressions in run configs: a number, or a '*'-separated product of
// factors among {d, b, n0, sqrt(d), d^P, b^P, n0^P, numbers}. Lets configs
// state sizes like "sqrt(d)" or step constants like "d^0.25*n0".
double resolve_scalar(const std::string& expr, double d, double b, double n0);

// Mask sizes resolve through the same grammar, then round to the nearest
// integer clamped to [1, d].
int resolve_mask_size(const std::string& expr, int d);

struct ScheduleSpec {
  double exponent = 1.0;
  std::string scale = "1";
  std::string shift = "0";

  StepSchedule resolve(double d, double b, double n0) const;
};

struct OptimizerSpec {
  std::string name;
  OptimizerKind kind = OptimizerKind::sgd;
  ScheduleSpec step;
  ScheduleSpec gain{0.75, "1", "n0"};
  std::string mask = "1";
  double nu = 0.0;
  double tau = 2.0;
  HessianQueryPoint query_point = HessianQueryPoint::current;
  GateNorm gate_norm = GateNorm::exact;
  bool average_estimate = false;  // weighted-averaged inverse estimate
};

struct SyntheticSpec {
  int dim = 10;
  double eigen_min = 1.0;
  double eigen_max = 1.0;
  double noise_sigma = 1.0;
};

struct DatasetSpec {
  std::string path;
  DatasetOptions options;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  int replications = 1;
  int checkpoints = 30;
  long samples = 0;  // synthetic sample budget; datasets stream their train split
  std::string batch = "d";
  std::string n0 = "d";
  int workers = 0;  // 0 = hardware concurrency
  long test_samples = 2000;
  long mc_samples = 1000000;
  bool table_mode = false;  // final-iterate metrics only
  bool export_snapshots = false;
  ProblemKind problem = ProblemKind::linear;
  double ridge_lambda = 0.0;
  std::optional<SyntheticSpec> synthetic;
  std::optional<DatasetSpec> dataset;
  bool warm_start_iterate = false;
  bool warm_start_estimate = false;
  std::vector<OptimizerSpec> optimizers;
  std::string out_dir = "runs";
};

// Parses the JSON run configuration; with paper_scale, the optional
// "paper_scale" object in the file is merge-patched over the config first.
RunConfig load_run_config(const std::string& path, bool paper_scale = false);
RunConfig parse_run_config(const std::string& json_text, bool paper_scale = false);

struct ExperimentRow {
  std::string run_id;
  std::string optimizer;
  int replication = 0;
  RunRecord record;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::string csv_path;
  std::string meta_path;
  std::vector<std::string> notes;  // per-run divergences/failures
};

// Executes every optimizer x replication on a worker pool, evaluating
// metrics at log-spaced checkpoints, and writes <out>/<name>.csv plus a JSON
// metadata sidecar. Rows appear in canonical (optimizer, replication,
// checkpoint) order regardless of worker count; identical config and seed
// give identical CSV bytes except for the wall_seconds column.
ExperimentResult run_experiment(const RunConfig& config);

// CSV helpers (RFC 4180).
std::string csv_escape(const std::string& field);
extern const char* const kCsvHeader;
std::string csv_row(const ExperimentRow& row);

// Analytic per-iteration multiply estimates, decomposed by stage. The
// instrumented counters are expected to land within a small constant of
// these.
struct IterationCostModel {
  std::uint64_t gradient = 0;      // b d
  std::uint64_t hessian_rows = 0;  // l b d
  std::uint64_t estimator = 0;     // l d^2 + l^2 d
  std::uint64_t step = 0;          // d^2 (Newton) or d
  std::uint64_t estimate_entries = 0;  // <= 2 l d

  std::uint64_t total() const { return gradient + hessian_rows + estimator + step; }
};

IterationCostModel analytic_iteration_cost(int dim, int batch, int mask_size,
                                           OptimizerKind kind);

// Iterate snapshot files (same framing as the estimate snapshots).
void write_iterate_snapshot(const std::string& path, const Vector& iterate, long iteration);
struct IterateSnapshot {
  Vector iterate;
  long iteration = 0;
};
IterateSnapshot read_iterate_snapshot(const std::string& path);

}  // namespace msna
