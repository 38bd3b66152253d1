#include "msna/optimizer.hpp"

#include "msna/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace msna {

bool is_averaged(OptimizerKind kind) {
  return kind == OptimizerKind::averaged_sgd || kind == OptimizerKind::averaged_msna;
}

bool is_newton(OptimizerKind kind) {
  return kind == OptimizerKind::msna || kind == OptimizerKind::averaged_msna;
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::averaged_sgd: return "averaged_sgd";
    case OptimizerKind::msna: return "msna";
    case OptimizerKind::averaged_msna: return "averaged_msna";
  }
  return "unknown";
}

Optimizer::Optimizer(int dim, const OptimizerOptions& options, std::uint64_t estimator_seed,
                     Vector initial_iterate, std::optional<SymMatrix> initial_estimate)
    : options_(options), iterate_(std::move(initial_iterate)) {
  if (iterate_.size() != dim) throw std::invalid_argument("Optimizer: iterate dimension mismatch");
  if (is_newton(options.kind)) {
    if (!options.estimator)
      throw std::invalid_argument("Optimizer: Newton kinds need estimator options");
    inverse_.emplace(dim, *options.estimator, estimator_seed, std::move(initial_estimate));
  } else if (options.estimator) {
    throw std::invalid_argument("Optimizer: gradient kinds must not carry estimator options");
  }
  averaged_ = iterate_;
  cum_weight_ = options_.weights(0);
}

bool Optimizer::guard_finite(const Vector& v, const char* what) {
  if (v.allFinite() && v.norm() < 1e8) return true;
  diverged_ = true;
  divergence_note_ = std::string(what) + " non-finite or exceeding 1e8 at step " +
                     std::to_string(n_ + 1);
  return false;
}

void Optimizer::sgd_step(const Vector& gradient, OpCounters* ops) {
  if (diverged_) return;
  if (!guard_finite(gradient, "gradient")) return;
  n_ += 1;
  const double alpha = options_.step(n_);
  iterate_ -= alpha * gradient;
  if (ops) ops->step += static_cast<std::uint64_t>(iterate_.size());
  if (!guard_finite(iterate_, "iterate")) return;
  averaged_update();
}

void Optimizer::msna_step(const Vector& gradient, const MaskedHessian& hessian_sample,
                          OpCounters* ops) {
  if (diverged_) return;
  if (!inverse_) throw std::logic_error("Optimizer: msna_step on a gradient-only optimizer");
  if (!guard_finite(gradient, "gradient")) return;
  n_ += 1;
  const double alpha = options_.step(n_);
  const double ridge = options_.ridge(n_);
  // Conditioned direction (A + nu I) g evaluated as A g + nu g, O(d^2).
  Vector direction = inverse_->estimate().apply(gradient);
  if (ridge != 0.0) direction += ridge * gradient;
  if (ops) {
    const auto d = static_cast<std::uint64_t>(iterate_.size());
    ops->step += d * d + (ridge != 0.0 ? d : 0) + d;
  }
  if (!guard_finite(direction, "conditioned direction")) return;
  iterate_ -= alpha * direction;
  if (!guard_finite(iterate_, "iterate")) return;
  inverse_->update(hessian_sample, ops);
  averaged_update();
}

IndexList Optimizer::sample_mask() {
  if (!inverse_) throw std::logic_error("Optimizer: sample_mask on a gradient-only optimizer");
  return inverse_->sample_mask();
}

void Optimizer::averaged_update() {
  const double w = options_.weights(n_);
  cum_weight_ += w;
  if (cum_weight_ <= 0.0) {
    averaged_ = iterate_;
    return;
  }
  const double mix = w / cum_weight_;
  averaged_ = (1.0 - mix) * averaged_ + mix * iterate_;
}

const Vector& Optimizer::output() const {
  return is_averaged(options_.kind) ? averaged_ : iterate_;
}

const Vector& Optimizer::hessian_query_iterate() const {
  return options_.query_point == HessianQueryPoint::averaged ? averaged_ : iterate_;
}

const InverseEstimator& Optimizer::inverse_estimator() const {
  if (!inverse_) throw std::logic_error("Optimizer: no inverse estimator");
  return *inverse_;
}

std::vector<long> log_spaced_checkpoints(long total_iterations, int count) {
  std::vector<long> points;
  if (total_iterations < 1) return points;
  if (count < 1) count = 1;
  const double lo = 0.0;
  const double hi = std::log10(static_cast<double>(total_iterations));
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? hi : lo + (hi - lo) * i / (count - 1);
    long p = std::llround(std::pow(10.0, t));
    p = std::clamp<long>(p, 1, total_iterations);
    if (points.empty() || p > points.back()) points.push_back(p);
  }
  if (points.empty() || points.back() != total_iterations) points.push_back(total_iterations);
  return points;
}

namespace {

RunRecord evaluate_checkpoint(const Optimizer& optimizer, const Problem& problem,
                              const MetricContext& metrics, long samples_seen,
                              double wall_seconds, const OpCounters& ops) {
  RunRecord rec;
  rec.samples_seen = samples_seen;
  rec.wall_seconds = wall_seconds;
  rec.flop_estimate = ops.total_multiplies();
  rec.bytes_written_estimate = ops.estimate_bytes();
  const Vector& out = optimizer.output();
  if (metrics.theta_star) rec.theta_err = (out - *metrics.theta_star).squaredNorm();
  if (metrics.inverse_hessian && optimizer.has_inverse_estimator()) {
    const double dist =
        frob_dist(optimizer.inverse_estimator().estimate(), *metrics.inverse_hessian);
    rec.estimate_err = dist * dist;
  }
  if (metrics.train_eval) {
    rec.train_loss = problem.loss(*metrics.train_eval, out);
    if (problem.is_classification()) rec.train_acc = problem.accuracy(*metrics.train_eval, out);
  }
  if (metrics.test_eval) {
    rec.test_loss = problem.loss(*metrics.test_eval, out);
    if (problem.is_classification()) rec.test_acc = problem.accuracy(*metrics.test_eval, out);
  }
  return rec;
}

}  // namespace

RunResult run(Optimizer& optimizer, const Problem& problem, BatchStream& stream,
              const std::vector<long>& checkpoint_iterations, const MetricContext& metrics,
              const CheckpointCallback& on_checkpoint) {
  RunResult result;
  const bool newton = optimizer.has_inverse_estimator();
  long samples_seen = 0;
  long iteration = 0;
  size_t next_checkpoint = 0;
  double wall_seconds = 0.0;

  using clock = std::chrono::steady_clock;
  while (true) {
    auto batch = stream.next();
    if (!batch) break;
    ++iteration;
    samples_seen += batch->size();

    const auto start = clock::now();
    if (newton) {
      const Vector g = problem.gradient(*batch, optimizer.iterate(), &result.ops);
      const IndexList mask = optimizer.sample_mask();
      const MaskedHessian h =
          problem.hessian_rows(*batch, optimizer.hessian_query_iterate(), mask, &result.ops);
      optimizer.msna_step(g, h, &result.ops);
    } else {
      const Vector g = problem.gradient(*batch, optimizer.iterate(), &result.ops);
      optimizer.sgd_step(g, &result.ops);
    }
    wall_seconds += std::chrono::duration<double>(clock::now() - start).count();

    while (next_checkpoint < checkpoint_iterations.size() &&
           checkpoint_iterations[next_checkpoint] == iteration) {
      result.records.push_back(
          evaluate_checkpoint(optimizer, problem, metrics, samples_seen, wall_seconds, result.ops));
      if (on_checkpoint) on_checkpoint(iteration, optimizer);
      ++next_checkpoint;
    }
    if (optimizer.diverged()) {
      result.diverged = true;
      result.note = optimizer.divergence_note();
      break;
    }
  }
  result.iterations = iteration;
  return result;
}

WarmStartResult warm_start_iterate(const Problem& problem, const Batch& init_batch, int steps,
                                   int grid_points, double lr_min, double lr_max) {
  WarmStartResult best;
  best.theta = Vector::Zero(problem.dim());
  best.loss = problem.loss(init_batch, best.theta);
  const double ratio =
      grid_points > 1 ? std::pow(lr_max / lr_min, 1.0 / (grid_points - 1)) : 1.0;
  double lr = lr_min;
  for (int g = 0; g < grid_points; ++g, lr *= ratio) {
    Vector theta = Vector::Zero(problem.dim());
    bool ok = true;
    for (int s = 0; s < steps; ++s) {
      theta -= lr * problem.gradient(init_batch, theta);
      if (!theta.allFinite() || theta.norm() > 1e8) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const double loss = problem.loss(init_batch, theta);
    if (std::isfinite(loss) && loss < best.loss) {
      best.theta = theta;
      best.loss = loss;
      best.learning_rate = lr;
    }
  }
  return best;
}

SymMatrix warm_start_estimate(const Problem& problem, const Batch& init_batch,
                              const Vector& theta0, double jitter) {
  IndexList all(static_cast<size_t>(problem.dim()));
  for (int i = 0; i < problem.dim(); ++i) all[static_cast<size_t>(i)] = i;
  const MaskedHessian full = problem.hessian_rows(init_batch, theta0, all);
  Matrix dense = full.rows;
  dense = (0.5 * (dense + dense.transpose())).eval();
  dense += jitter * Matrix::Identity(problem.dim(), problem.dim());
  return brute_inverse(SymMatrix::from_dense(dense, 1e-6));
}

}  // namespace msna
