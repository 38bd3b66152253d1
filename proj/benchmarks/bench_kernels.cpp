#include <benchmark/benchmark.h>

#include "msna/data.hpp"
#include "msna/inverse_estimator.hpp"
#include "msna/optimizer.hpp"
#include "msna/problems.hpp"

#include <random>

using namespace msna;

namespace {

MaskedHessian sample_hessian(std::mt19937_64& rng, int d, int l) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x(d);
  for (int i = 0; i < d; ++i) x(i) = gauss(rng);
  MaskSampler sampler(d, l, rng());
  MaskedHessian h;
  h.dim = d;
  h.indices = sampler.sample();
  h.rows.resize(l, d);
  for (int k = 0; k < l; ++k) h.rows.row(k) = x(h.indices[static_cast<size_t>(k)]) * x.transpose();
  return h;
}

void BM_estimate_update(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int l = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  InverseEstimatorOptions opt;
  opt.gain = StepSchedule(0.75, 1.0, static_cast<double>(d));
  opt.block_size = l;
  InverseEstimator est(d, opt, 2);
  const MaskedHessian h = sample_hessian(rng, d, l);
  for (auto _ : state) {
    est.update(h);
    benchmark::DoNotOptimize(est.estimate().dense().data());
  }
  state.SetComplexityN(static_cast<int64_t>(l) * d * d);
}

void BM_masked_op_norm(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int l = static_cast<int>(state.range(1));
  std::mt19937_64 rng(3);
  const MaskedHessian h = sample_hessian(rng, d, l);
  for (auto _ : state) benchmark::DoNotOptimize(masked_op_norm(h));
}

void BM_hessian_rows(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int l = static_cast<int>(state.range(1));
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, d, 0.01, 1.0, 5);
  SyntheticStream stream(model, d, d, 7);
  const Batch batch = *stream.next();
  const Problem problem = Problem::linear_regression(d);
  const Vector theta = Vector::Zero(d);
  MaskSampler sampler(d, l, 11);
  for (auto _ : state) {
    const IndexList mask = sampler.sample();
    benchmark::DoNotOptimize(problem.hessian_rows(batch, theta, mask));
  }
}

void BM_full_step(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int l = static_cast<int>(state.range(1));
  const SyntheticModel model = SyntheticModel::make(ProblemKind::linear, d, 0.01, 1.0, 5);
  SyntheticStream stream(model, 1L << 40, d, 7);
  const Problem problem = Problem::linear_regression(d);

  OptimizerOptions options;
  options.kind = OptimizerKind::msna;
  options.step = StepSchedule(1.0, 1.0, static_cast<double>(d));
  InverseEstimatorOptions est;
  est.gain = StepSchedule(0.75, 1.0, static_cast<double>(d));
  est.block_size = l;
  options.estimator = est;
  Optimizer optimizer(d, options, 13, model.theta_star);

  for (auto _ : state) {
    const Batch batch = *stream.next();
    const Vector g = problem.gradient(batch, optimizer.iterate());
    const IndexList mask = optimizer.sample_mask();
    optimizer.msna_step(g, problem.hessian_rows(batch, optimizer.iterate(), mask));
  }
}

}  // namespace

BENCHMARK(BM_estimate_update)->Args({64, 1})->Args({64, 8})->Args({256, 1})->Args({256, 16});
BENCHMARK(BM_masked_op_norm)->Args({256, 1})->Args({256, 16})->Args({1024, 32});
BENCHMARK(BM_hessian_rows)->Args({256, 1})->Args({256, 16});
BENCHMARK(BM_full_step)->Args({100, 1})->Args({100, 10})->Args({256, 16});

BENCHMARK_MAIN();
