#pragma once

#include "msna/linalg.hpp"
#include "msna/schedules.hpp"
#include "msna/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace msna {

// How the truncation gate measures the size of a masked Hessian sample.
// `exact` is the operator norm; `frobenius_bound` is the cheaper upper bound
// (experimental: it gates more often than strictly needed).
enum class GateNorm { exact, frobenius_bound };

struct InverseEstimatorOptions {
  StepSchedule gain{0.75, 1.0, 0.0};  // gamma_n; exponent must be < 1
  int block_size = 1;                 // rows/columns refreshed per update
  std::optional<double> averaging_tau;  // enables the weighted-averaged estimate
  GateNorm gate_norm = GateNorm::exact;
};

// Online estimator of the inverse Hessian at the optimum. Each update takes
// one masked Hessian sample (block_size rows) and applies
//   A <- A - gain_n (H~ A + A H~^T - 2 M) + gain_n^2 H~ A H~^T
// unless the truncation gate gain_n * ||H~||_op > 1/2 fires, in which case A
// is left untouched. The update writes only the masked rows and columns of
// A; the products cost O(l d^2). Positive definiteness is preserved for any
// SPD start.
class InverseEstimator {
 public:
  InverseEstimator(int dim, const InverseEstimatorOptions& options, std::uint64_t seed,
                   std::optional<SymMatrix> init = std::nullopt);

  // Draws the index set for the next update; the caller evaluates the Hessian
  // oracle on exactly these rows.
  IndexList sample_mask();

  // Applies one update. Returns false when the truncation gate skipped the
  // step (the iteration counter and the averaged estimate still advance).
  bool update(const MaskedHessian& h, OpCounters* ops = nullptr);

  const SymMatrix& estimate() const { return estimate_; }
  const SymMatrix& averaged_estimate() const;
  bool averaging_enabled() const { return averaged_.has_value(); }

  long iterations() const { return n_; }
  int dim() const { return estimate_.dim(); }
  int block_size() const { return options_.block_size; }
  const InverseEstimatorOptions& options() const { return options_; }

  // Sample-size diagnostics: how often the gate fired and how heavy the
  // sample-norm tail was. Reported in run metadata, never acted on.
  long truncated_steps() const { return truncated_; }
  double max_sample_norm() const { return max_sample_norm_; }

 private:
  struct Averaged {
    SymMatrix value;
    AveragingWeights weights;
    double cum_weight = 0.0;
  };

  InverseEstimatorOptions options_;
  SymMatrix estimate_;
  long n_ = 0;
  MaskSampler sampler_;
  std::optional<Averaged> averaged_;
  long truncated_ = 0;
  double max_sample_norm_ = 0.0;
};

// Snapshot format for checkpoint export: two little-endian uint64 (dim,
// iteration) followed by dim*dim doubles, row-major.
void write_estimate_snapshot(std::ostream& out, const SymMatrix& estimate, long iteration);
void write_estimate_snapshot(const std::string& path, const SymMatrix& estimate, long iteration);
struct EstimateSnapshot {
  SymMatrix estimate;
  long iteration = 0;
};
EstimateSnapshot read_estimate_snapshot(std::istream& in);
EstimateSnapshot read_estimate_snapshot(const std::string& path);

}  // namespace msna
