#include "msna/harness.hpp"

#include "msna/rng.hpp"
#include "msna/verify.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace msna {

using nlohmann::json;

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

const char* const kCsvHeader =
    "run_id,optimizer,replication,samples_seen,theta_err,estimate_err,train_loss,test_loss,"
    "train_acc,test_acc,wall_seconds,flop_estimate,estimate_bytes_written";

namespace {

std::string format_metric(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string csv_row(const ExperimentRow& row) {
  std::ostringstream out;
  out << csv_escape(row.run_id) << ',' << csv_escape(row.optimizer) << ',' << row.replication
      << ',' << row.record.samples_seen << ',' << format_metric(row.record.theta_err) << ','
      << format_metric(row.record.estimate_err) << ',' << format_metric(row.record.train_loss)
      << ',' << format_metric(row.record.test_loss) << ','
      << format_metric(row.record.train_acc) << ',' << format_metric(row.record.test_acc) << ','
      << format_metric(row.record.wall_seconds) << ',' << row.record.flop_estimate << ','
      << row.record.bytes_written_estimate;
  return out.str();
}

IterationCostModel analytic_iteration_cost(int dim, int batch, int mask_size,
                                           OptimizerKind kind) {
  IterationCostModel cost;
  const auto d = static_cast<std::uint64_t>(dim);
  const auto b = static_cast<std::uint64_t>(batch);
  const auto l = static_cast<std::uint64_t>(mask_size);
  cost.gradient = b * d;
  if (is_newton(kind)) {
    cost.hessian_rows = l * b * d;
    cost.estimator = l * d * d + l * l * d;
    cost.step = d * d;
    cost.estimate_entries = 2 * l * d;
  } else {
    cost.step = d;
  }
  return cost;
}

void write_iterate_snapshot(const std::string& path, const Vector& iterate, long iteration) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_iterate_snapshot: cannot open " + path);
  constexpr std::uint64_t kMagic = 0x4d534e4156454331ULL;  // "MSNAVEC1"
  const std::uint64_t header[3] = {kMagic, static_cast<std::uint64_t>(iterate.size()),
                                   static_cast<std::uint64_t>(iteration)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(iterate.data()),
            static_cast<std::streamsize>(sizeof(double) * iterate.size()));
  if (!out) throw std::runtime_error("write_iterate_snapshot: write failed");
}

IterateSnapshot read_iterate_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_iterate_snapshot: cannot open " + path);
  constexpr std::uint64_t kMagic = 0x4d534e4156454331ULL;
  std::uint64_t header[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kMagic) throw std::runtime_error("read_iterate_snapshot: bad header");
  IterateSnapshot snap;
  snap.iterate.resize(static_cast<long>(header[1]));
  in.read(reinterpret_cast<char*>(snap.iterate.data()),
          static_cast<std::streamsize>(sizeof(double) * snap.iterate.size()));
  if (!in) throw std::runtime_error("read_iterate_snapshot: truncated payload");
  snap.iteration = static_cast<long>(header[2]);
  return snap;
}

namespace {

struct ResolvedOptimizer {
  OptimizerSpec spec;
  OptimizerOptions options;
  int mask_size = 0;
};

struct TaskOutput {
  std::vector<ExperimentRow> rows;
  std::string note;
  std::string diagnostic;
  bool done = false;
};

Vector unit_sphere_offset(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  double nrm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
    nrm = v.norm();
  } while (nrm == 0.0);
  return v / nrm;
}

std::string snapshot_stem(const RunConfig& cfg, const std::string& opt, int rep) {
  return cfg.out_dir + "/snapshots/" + cfg.name + "__" + opt + "__rep" + std::to_string(rep);
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config) {
  if (!config.synthetic && !config.dataset)
    throw std::invalid_argument("run_experiment: config has no data source");
  if (config.optimizers.empty())
    throw std::invalid_argument("run_experiment: config has no optimizers");

  // Load or generate the data description and resolve every derived scalar
  // up front so that configuration errors surface before any run starts.
  std::optional<SyntheticModel> model;
  std::optional<DatasetSplit> split;
  int dim = 0;
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    const ProblemKind data_kind =
        config.problem == ProblemKind::linear ? ProblemKind::linear : ProblemKind::logistic;
    model = SyntheticModel::make(data_kind, s.dim, s.eigen_min, s.eigen_max,
                                 derive_seed(config.seed, Stream::model), s.noise_sigma);
    dim = s.dim;
  } else {
    split = load_dataset(config.dataset->path, config.dataset->options,
                         derive_seed(config.seed, Stream::shuffle));
    dim = split->dim();
  }

  const double d_val = static_cast<double>(dim);
  const int batch = [&] {
    const double raw = resolve_scalar(config.batch, d_val, 0.0, 0.0);
    const long b = std::lround(raw);
    if (b < 1) throw std::invalid_argument("run_experiment: batch resolves to < 1");
    return static_cast<int>(b);
  }();
  const double n0 = resolve_scalar(config.n0, d_val, batch, 0.0);

  Problem problem = [&] {
    switch (config.problem) {
      case ProblemKind::linear: return Problem::linear_regression(dim);
      case ProblemKind::logistic: return Problem::logistic_regression(dim);
      case ProblemKind::ridge_logistic:
        return Problem::ridge_logistic_regression(dim, config.ridge_lambda);
    }
    throw std::invalid_argument("run_experiment: bad problem kind");
  }();

  std::vector<ResolvedOptimizer> optimizers;
  std::vector<std::string> config_warnings;
  for (const auto& spec : config.optimizers) {
    ResolvedOptimizer r;
    r.spec = spec;
    r.options.kind = spec.kind;
    r.options.step = spec.step.resolve(d_val, batch, n0);
    if (!is_averaged(spec.kind) && r.options.step.exponent == 1.0 &&
        r.options.step.scale <= 0.5)
      config_warnings.push_back(spec.name +
                                ": step scale <= 1/2 with exponent 1 is outside the "
                                "guaranteed-efficiency range; proceeding anyway");
    r.options.ridge = RidgeSchedule(spec.nu, r.options.step.exponent);
    r.options.weights = AveragingWeights(spec.tau);
    r.options.query_point = spec.query_point;
    if (is_newton(spec.kind)) {
      InverseEstimatorOptions est;
      est.gain = spec.gain.resolve(d_val, batch, n0);
      est.block_size = resolve_mask_size(spec.mask, dim);
      est.gate_norm = spec.gate_norm;
      if (spec.average_estimate) est.averaging_tau = spec.tau;
      r.options.estimator = est;
      r.mask_size = est.block_size;
    }
    optimizers.push_back(std::move(r));
  }

  const long total_iterations =
      config.synthetic ? config.samples / batch : split->train_size() / batch;
  if (total_iterations < 1)
    throw std::invalid_argument("run_experiment: fewer samples than one batch");
  const std::vector<long> checkpoints =
      config.table_mode ? std::vector<long>{total_iterations}
                        : log_spaced_checkpoints(total_iterations, config.checkpoints);

  // References for the error metrics, shared by every run.
  MetricContext base_metrics;
  Batch test_batch;
  Batch train_eval;
  if (config.synthetic) {
    base_metrics.theta_star = model->theta_star;
    if (config.problem == ProblemKind::linear) {
      base_metrics.inverse_hessian = brute_inverse(model->covariance());
    } else if (config.mc_samples > 0) {
      base_metrics.inverse_hessian = reference_inverse_hessian(
          config.problem, model->covariance(), model->theta_star,
          derive_seed(config.seed, Stream::monte_carlo), config.mc_samples,
          config.ridge_lambda);
    }
    if (config.test_samples > 0) {
      SyntheticStream eval_stream(*model, config.test_samples, 1,
                                  derive_seed(config.seed, Stream::test_data));
      test_batch = eval_stream.draw(static_cast<int>(config.test_samples));
      base_metrics.test_eval = &test_batch;
    }
  } else {
    test_batch.x = split->test_x;
    test_batch.y = split->test_y;
    base_metrics.test_eval = &test_batch;
    train_eval.x = split->train_x;
    train_eval.y = split->train_y;
    base_metrics.train_eval = &train_eval;
  }

  // Shared warm start (real-data protocol): theta0 from gradient steps on
  // the init batch; the estimate warm start happens per Newton run and its
  // inversion time counts toward that run's wall time.
  std::optional<Vector> warm_theta;
  Batch init_batch;
  if (split) {
    init_batch.x = split->init_x;
    init_batch.y = split->init_y;
    if (config.warm_start_iterate && init_batch.size() > 0)
      warm_theta = warm_start_iterate(problem, init_batch).theta;
  }

  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    if (config.export_snapshots)
      std::filesystem::create_directories(config.out_dir + "/snapshots");
  }

  const size_t task_count =
      optimizers.size() * static_cast<size_t>(config.replications);
  std::vector<TaskOutput> outputs(task_count);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<size_t> next_task{0};

  auto run_task = [&](size_t task_index) {
    const size_t opt_index = task_index / static_cast<size_t>(config.replications);
    const int rep = static_cast<int>(task_index % static_cast<size_t>(config.replications));
    const ResolvedOptimizer& ropt = optimizers[opt_index];
    TaskOutput out;
    try {
      // Initial iterate: unit sphere around theta* for synthetic runs,
      // warm start or zero for datasets. Shared across optimizers.
      Vector theta0;
      if (config.synthetic) {
        auto init_rng = make_rng(derive_seed(config.seed, Stream::init, rep));
        theta0 = model->theta_star + unit_sphere_offset(dim, init_rng);
      } else {
        theta0 = warm_theta ? *warm_theta : Vector::Zero(dim);
      }

      double wall_offset = 0.0;
      std::optional<SymMatrix> a0;
      if (is_newton(ropt.spec.kind) && config.warm_start_estimate && split &&
          init_batch.size() > 0) {
        const auto t0 = std::chrono::steady_clock::now();
        a0 = warm_start_estimate(problem, init_batch, theta0);
        wall_offset =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }

      Optimizer optimizer(dim, ropt.options,
                          derive_seed(config.seed, Stream::mask, rep, opt_index), theta0,
                          std::move(a0));

      std::unique_ptr<BatchStream> stream;
      if (config.synthetic) {
        stream = std::make_unique<SyntheticStream>(*model, config.samples, batch,
                                                   derive_seed(config.seed, Stream::data, rep));
      } else {
        stream = std::make_unique<MatrixBatcher>(split->train_x, split->train_y, batch);
      }

      std::function<void(long, const Optimizer&)> on_checkpoint;
      if (config.export_snapshots && !config.out_dir.empty()) {
        const std::string stem = snapshot_stem(config, ropt.spec.name, rep);
        on_checkpoint = [stem](long iteration, const Optimizer& opt) {
          write_iterate_snapshot(stem + "__iter" + std::to_string(iteration) + ".theta",
                                 opt.output(), iteration);
          if (opt.has_inverse_estimator()) {
            write_estimate_snapshot(stem + "__iter" + std::to_string(iteration) + ".inv",
                                    opt.inverse_estimator().estimate(), iteration);
            if (opt.inverse_estimator().averaging_enabled())
              write_estimate_snapshot(stem + "__iter" + std::to_string(iteration) + ".avg_inv",
                                      opt.inverse_estimator().averaged_estimate(), iteration);
          }
        };
      }

      RunResult result =
          run(optimizer, problem, *stream, checkpoints, base_metrics, on_checkpoint);
      if (result.diverged) out.note = ropt.spec.name + " rep " + std::to_string(rep) +
                                      " diverged: " + result.note;
      if (optimizer.has_inverse_estimator()) {
        const InverseEstimator& est = optimizer.inverse_estimator();
        std::ostringstream diag;
        diag << ropt.spec.name << " rep " << rep << ": " << est.truncated_steps() << "/"
             << est.iterations() << " updates truncated, max sample norm "
             << est.max_sample_norm();
        out.diagnostic = diag.str();
      }
      out.rows.reserve(result.records.size());
      for (auto& rec : result.records) {
        rec.wall_seconds += wall_offset;
        out.rows.push_back(ExperimentRow{config.name, ropt.spec.name, rep, rec});
      }
    } catch (const std::exception& e) {
      out.note = ropt.spec.name + " rep " + std::to_string(rep) + " failed: " + e.what();
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      out.done = true;
      outputs[task_index] = std::move(out);
    }
    cv.notify_all();
  };

  unsigned worker_count = config.workers > 0
                              ? static_cast<unsigned>(config.workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  worker_count = std::min<unsigned>(worker_count, static_cast<unsigned>(task_count));

  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (unsigned w = 0; w < worker_count; ++w)
    workers.emplace_back([&] {
      while (true) {
        const size_t t = next_task.fetch_add(1);
        if (t >= task_count) return;
        run_task(t);
      }
    });

  ExperimentResult result;
  std::ofstream csv;
  if (!config.out_dir.empty()) {
    result.csv_path = config.out_dir + "/" + config.name + ".csv";
    csv.open(result.csv_path);
    if (!csv) throw std::runtime_error("run_experiment: cannot open " + result.csv_path);
    csv << kCsvHeader << "\n";
  }

  result.notes = config_warnings;

  // Rows stream out incrementally in canonical task order, independent of
  // which worker finishes first.
  std::vector<std::string> diagnostics;
  for (size_t t = 0; t < task_count; ++t) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return outputs[t].done; });
    TaskOutput out = std::move(outputs[t]);
    lock.unlock();
    if (!out.note.empty()) result.notes.push_back(out.note);
    if (!out.diagnostic.empty()) diagnostics.push_back(out.diagnostic);
    for (const auto& row : out.rows) {
      if (csv.is_open()) csv << csv_row(row) << "\n";
      result.rows.push_back(row);
    }
    if (csv.is_open()) csv.flush();
  }
  for (auto& w : workers) w.join();

  if (!config.out_dir.empty()) {
    result.meta_path = config.out_dir + "/" + config.name + ".meta.json";
    json meta;
    meta["name"] = config.name;
    meta["seed"] = config.seed;
    meta["dim"] = dim;
    meta["batch"] = batch;
    meta["n0"] = n0;
    meta["iterations"] = total_iterations;
    meta["checkpoints"] = checkpoints;
    meta["replications"] = config.replications;
    meta["problem"] = static_cast<int>(config.problem);
    meta["table_mode"] = config.table_mode;
    json opts = json::array();
    for (const auto& r : optimizers) {
      json o;
      o["name"] = r.spec.name;
      o["kind"] = to_string(r.spec.kind);
      o["step"] = {{"exponent", r.options.step.exponent},
                   {"scale", r.options.step.scale},
                   {"shift", r.options.step.shift}};
      if (r.options.estimator) {
        o["gain"] = {{"exponent", r.options.estimator->gain.exponent},
                     {"scale", r.options.estimator->gain.scale},
                     {"shift", r.options.estimator->gain.shift}};
        o["mask_size"] = r.mask_size;
      }
      o["nu"] = r.spec.nu;
      o["tau"] = r.spec.tau;
      opts.push_back(o);
    }
    meta["optimizers"] = opts;
    if (model) {
      meta["eigen_min"] = model->eigen_min;
      meta["eigen_max"] = model->eigen_max;
      std::vector<double> ts(model->theta_star.data(),
                             model->theta_star.data() + model->theta_star.size());
      meta["theta_star"] = ts;
    }
    if (split) {
      meta["dataset"] = {{"path", split->name},
                         {"train_size", split->train_size()},
                         {"init_size", split->init_size()},
                         {"test_size", split->test_size()},
                         {"standardize", config.dataset->options.standardize},
                         {"intercept", config.dataset->options.intercept}};
    }
    if (!result.notes.empty()) meta["notes"] = result.notes;
    if (!diagnostics.empty()) meta["estimator_diagnostics"] = diagnostics;
    std::ofstream meta_out(result.meta_path);
    meta_out << meta.dump(2) << "\n";
  }

  return result;
}

}  // namespace msna
