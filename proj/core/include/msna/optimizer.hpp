#pragma once

#include "msna/data.hpp"
#include "msna/inverse_estimator.hpp"
#include "msna/problems.hpp"
#include "msna/schedules.hpp"
#include "msna/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace msna {

enum class OptimizerKind { sgd, averaged_sgd, msna, averaged_msna };

bool is_averaged(OptimizerKind kind);
bool is_newton(OptimizerKind kind);
std::string to_string(OptimizerKind kind);

// Where the Hessian oracle is queried for the estimator update: at the
// current iterate or at the averaged one.
enum class HessianQueryPoint { current, averaged };

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::sgd;
  StepSchedule step{1.0, 1.0, 0.0};     // alpha_n
  RidgeSchedule ridge{0.0, 1.0};        // nu_n
  AveragingWeights weights{0.0};        // tau
  HessianQueryPoint query_point = HessianQueryPoint::current;
  std::optional<InverseEstimatorOptions> estimator;  // required for Newton kinds
};

// One optimizer instance drives one run. The per-step order is fixed:
// gradient query, iterate update, Hessian query + estimator update,
// averaging.
class Optimizer {
 public:
  Optimizer(int dim, const OptimizerOptions& options, std::uint64_t estimator_seed,
            Vector initial_iterate, std::optional<SymMatrix> initial_estimate = std::nullopt);

  // theta <- theta - alpha_n * g, then the averaging recursion.
  void sgd_step(const Vector& gradient, OpCounters* ops = nullptr);

  // theta <- theta - alpha_n * (A g + nu_n g), estimator update with the
  // masked sample, then the averaging recursion.
  void msna_step(const Vector& gradient, const MaskedHessian& hessian_sample,
                 OpCounters* ops = nullptr);

  // Index set for the next Hessian query (Newton kinds only).
  IndexList sample_mask();

  const Vector& iterate() const { return iterate_; }
  const Vector& averaged_iterate() const { return averaged_; }
  // The estimator this configuration reports: averaged iterate for averaged
  // kinds, the raw iterate otherwise.
  const Vector& output() const;
  // Query point for the Hessian oracle this step.
  const Vector& hessian_query_iterate() const;

  const InverseEstimator& inverse_estimator() const;
  bool has_inverse_estimator() const { return inverse_.has_value(); }

  long steps() const { return n_; }
  bool diverged() const { return diverged_; }
  const std::string& divergence_note() const { return divergence_note_; }
  const OptimizerOptions& options() const { return options_; }

 private:
  void averaged_update();
  bool guard_finite(const Vector& v, const char* what);

  OptimizerOptions options_;
  Vector iterate_;
  Vector averaged_;
  double cum_weight_ = 0.0;
  long n_ = 0;
  std::optional<InverseEstimator> inverse_;
  bool diverged_ = false;
  std::string divergence_note_;
};

// Per-checkpoint metrics captured by the run driver.
struct RunRecord {
  long samples_seen = 0;
  double theta_err = std::numeric_limits<double>::quiet_NaN();  // ||theta - theta*||^2
  double estimate_err = std::numeric_limits<double>::quiet_NaN();  // ||A - H^{-1}||_F^2
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  std::uint64_t flop_estimate = 0;
  std::uint64_t bytes_written_estimate = 0;
};

// References against which checkpoint metrics are computed; any piece may be
// absent.
struct MetricContext {
  std::optional<Vector> theta_star;
  std::optional<SymMatrix> inverse_hessian;
  const Batch* train_eval = nullptr;
  const Batch* test_eval = nullptr;
};

struct RunResult {
  std::vector<RunRecord> records;
  bool diverged = false;
  std::string note;
  long iterations = 0;
  OpCounters ops;
};

// Streams batches into the optimizer until the stream is exhausted,
// recording metrics at the given iteration checkpoints (sorted, 1-based).
// Checkpoint evaluation and the optional checkpoint callback are excluded
// from the recorded wall time. A divergence guard halts the run and keeps
// the records collected so far.
using CheckpointCallback = std::function<void(long iteration, const Optimizer&)>;
RunResult run(Optimizer& optimizer, const Problem& problem, BatchStream& stream,
              const std::vector<long>& checkpoint_iterations, const MetricContext& metrics,
              const CheckpointCallback& on_checkpoint = nullptr);

// Log-spaced 1-based iteration checkpoints, deduplicated, always including
// the final iteration.
std::vector<long> log_spaced_checkpoints(long total_iterations, int count);

// Warm start: runs `steps` full-batch gradient-descent passes on the init
// batch from a zero start, with the constant learning rate picked from a
// geometric grid by final init-batch loss.
struct WarmStartResult {
  Vector theta;
  double learning_rate = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();
};
WarmStartResult warm_start_iterate(const Problem& problem, const Batch& init_batch,
                                   int steps = 100, int grid_points = 10,
                                   double lr_min = 1e-4, double lr_max = 10.0);

// Warm start for the inverse estimate: inverts the init-batch empirical
// Hessian at theta0 (plus a tiny diagonal jitter against singular batches).
SymMatrix warm_start_estimate(const Problem& problem, const Batch& init_batch,
                              const Vector& theta0, double jitter = 1e-10);

}  // namespace msna
