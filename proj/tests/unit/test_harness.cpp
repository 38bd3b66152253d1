#include <doctest.h>

#include "msna/harness.hpp"
#include "msna/plot.hpp"
#include "msna/rng.hpp"
#include "msna/verify.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace msna;

namespace {

std::string scratch_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / "msna_tests" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Drops the wall_seconds column so deterministic runs compare byte-equal.
std::string strip_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i == 10) continue;  // wall_seconds
      out << fields[i] << (i + 1 == fields.size() ? "" : ",");
    }
    out << "\n";
  }
  return out.str();
}

const char* kSmallConfig = R"json({
  "name": "smoke",
  "seed": 7,
  "replications": 2,
  "checkpoints": 5,
  "samples": 3000,
  "batch": "d",
  "n0": "d",
  "workers": 2,
  "test_samples": 200,
  "out": "OUTDIR",
  "problem": {"kind": "linear"},
  "data": {"synthetic": {"dim": 3, "eigen_min": 0.5, "eigen_max": 1.0}},
  "optimizers": [
    {"name": "sgd", "kind": "sgd", "step": {"exponent": 1.0, "scale": 1.0, "shift": "n0"}},
    {"name": "avg_sgd", "kind": "averaged_sgd", "tau": 2.0,
     "step": {"exponent": 0.75, "scale": "d^0.25", "shift": "d^0.25*n0"}},
    {"name": "msna", "kind": "msna", "mask": "sqrt(d)",
     "step": {"exponent": 1.0, "scale": 1.0, "shift": "n0"},
     "gain": {"exponent": 0.75, "scale": 1.0, "shift": "n0"}}
  ]
})json";

std::string config_with_out(const std::string& out_dir) {
  std::string text = kSmallConfig;
  const auto pos = text.find("OUTDIR");
  return text.substr(0, pos) + out_dir + text.substr(pos + 6);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("scalar expressions") {
  CHECK(resolve_scalar("d", 100, 0, 0) == 100.0);
  CHECK(resolve_scalar("sqrt(d)", 100, 0, 0) == doctest::Approx(10.0));
  CHECK(resolve_scalar("d^0.25", 16, 0, 0) == doctest::Approx(2.0));
  CHECK(resolve_scalar("2.5", 0, 0, 0) == 2.5);
  CHECK(resolve_scalar("d^0.25*n0", 16, 0, 7) == doctest::Approx(14.0));
  CHECK(resolve_scalar("b^0.5", 0, 25, 0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(resolve_scalar("q", 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(resolve_scalar("", 1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(resolve_scalar("d^x", 1, 1, 1), std::invalid_argument);
}

TEST_CASE("mask size resolution") {
  CHECK(resolve_mask_size("1", 1000) == 1);
  CHECK(resolve_mask_size("d^0.25", 1000) == 6);   // 5.62 rounds up
  CHECK(resolve_mask_size("sqrt(d)", 100) == 10);
  CHECK(resolve_mask_size("sqrt(d)", 1000) == 32);  // 31.6 rounds up
  CHECK(resolve_mask_size("d", 17) == 17);
  CHECK(resolve_mask_size("0.2", 50) == 1);     // floor clamps at 1
  CHECK(resolve_mask_size("d*d", 10) == 10);    // clamp at d
}

TEST_CASE("config parsing and validation") {
  const RunConfig cfg = parse_run_config(config_with_out("unused"));
  CHECK(cfg.name == "smoke");
  CHECK(cfg.replications == 2);
  REQUIRE(cfg.optimizers.size() == 3);
  CHECK(cfg.optimizers[2].kind == OptimizerKind::msna);
  CHECK(cfg.optimizers[2].mask == "sqrt(d)");
  CHECK(cfg.optimizers[1].step.exponent == 0.75);

  CHECK_THROWS(parse_run_config("{\"name\": \"x\"}"));  // no data
  CHECK_THROWS(parse_run_config(R"({"data": {"synthetic": {"dim": 2}}, "samples": 10})"));
  CHECK_THROWS(parse_run_config(
      R"({"data": {"synthetic": {"dim": 2}}, "samples": 10,
          "optimizers": [{"kind": "nope"}]})"));
}

TEST_CASE("paper-scale merge patch") {
  const std::string text = R"({
    "name": "scaled", "samples": 1000,
    "data": {"synthetic": {"dim": 10}},
    "optimizers": [{"kind": "sgd"}],
    "paper_scale": {"samples": 10000000, "data": {"synthetic": {"dim": 1000}}}
  })";
  const RunConfig desk = parse_run_config(text, false);
  CHECK(desk.samples == 1000);
  CHECK(desk.synthetic->dim == 10);
  const RunConfig paper = parse_run_config(text, true);
  CHECK(paper.samples == 10000000);
  CHECK(paper.synthetic->dim == 1000);
}

TEST_CASE("csv escaping") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("analytic iteration cost") {
  const IterationCostModel cost = analytic_iteration_cost(100, 100, 1, OptimizerKind::msna);
  CHECK(cost.estimator == 10000 + 100);  // l d^2 + l^2 d
  CHECK(cost.hessian_rows == 10000);
  CHECK(cost.step == 10000);
  CHECK(cost.estimate_entries == 200);

  const IterationCostModel doubled = analytic_iteration_cost(100, 100, 2, OptimizerKind::msna);
  CHECK(doubled.estimator == doctest::Approx(2.0 * cost.estimator).epsilon(0.1));

  const IterationCostModel sgd_cost = analytic_iteration_cost(100, 100, 1, OptimizerKind::sgd);
  CHECK(sgd_cost.estimator == 0);
  CHECK(sgd_cost.hessian_rows == 0);
}

TEST_CASE("experiment row counting and determinism") {
  const std::string out_a = scratch_dir("exp_a");
  const std::string out_b = scratch_dir("exp_b");

  const RunConfig cfg_a = parse_run_config(config_with_out(out_a));
  const ExperimentResult res_a = run_experiment(cfg_a);
  // 3 optimizers x 2 replications x 5 checkpoints.
  CHECK(res_a.rows.size() == 30);

  // A second invocation with a different worker count writes identical bytes
  // modulo the wall-time column.
  std::string text_b = config_with_out(out_b);
  const auto pos = text_b.find("\"workers\": 2");
  text_b.replace(pos, 12, "\"workers\": 1");
  const RunConfig cfg_b = parse_run_config(text_b);
  const ExperimentResult res_b = run_experiment(cfg_b);
  CHECK(strip_wall_column(read_file(res_a.csv_path)) ==
        strip_wall_column(read_file(res_b.csv_path)));

  // Canonical ordering: optimizer blocks in config order, replications inside.
  CHECK(res_a.rows.front().optimizer == "sgd");
  CHECK(res_a.rows.back().optimizer == "msna");
  const std::string meta = read_file(res_a.meta_path);
  CHECK(meta.find("theta_star") != std::string::npos);
}

TEST_CASE("checkpoint metrics match exported snapshots") {
  const std::string out = scratch_dir("snapshots");
  std::string text = config_with_out(out);
  const auto pos = text.find("\"seed\": 7");
  text.replace(pos, 9, "\"seed\": 11, \"export_snapshots\": true");
  const RunConfig cfg = parse_run_config(text);
  const ExperimentResult res = run_experiment(cfg);

  const SyntheticModel model =
      SyntheticModel::make(ProblemKind::linear, 3, 0.5, 1.0, derive_seed(11, Stream::model));
  const SymMatrix h_inv = brute_inverse(model.covariance());

  int checked = 0;
  for (const auto& row : res.rows) {
    const long iteration = row.record.samples_seen / 3;
    const std::string stem = out + "/snapshots/" + cfg.name + "__" + row.optimizer + "__rep" +
                             std::to_string(row.replication) + "__iter" +
                             std::to_string(iteration);
    const IterateSnapshot theta = read_iterate_snapshot(stem + ".theta");
    const double theta_err = (theta.iterate - model.theta_star).squaredNorm();
    CHECK(theta_err == doctest::Approx(row.record.theta_err).epsilon(1e-12));
    if (row.optimizer == "msna") {
      const EstimateSnapshot est = read_estimate_snapshot(stem + ".inv");
      const double err = frob_dist(est.estimate, h_inv);
      CHECK(err * err == doctest::Approx(row.record.estimate_err).epsilon(1e-12));
    }
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("plot data and quantile cross-check") {
  const std::string out = scratch_dir("plots");

  SUBCASE("missing csv errors") {
    CHECK_THROWS(compute_plot_data(out + "/absent.csv", "theta_err"));
  }
  SUBCASE("empty csv errors") {
    const std::string path = out + "/empty.csv";
    std::ofstream(path) << "";
    CHECK_THROWS(compute_plot_data(path, "theta_err"));
  }
  SUBCASE("missing columns are listed") {
    const std::string path = out + "/nocol.csv";
    std::ofstream(path) << "a,b\n1,2\n";
    try {
      compute_plot_data(path, "theta_err");
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      const std::string what = e.what();
      CHECK(what.find("optimizer") != std::string::npos);
      CHECK(what.find("theta_err") != std::string::npos);
    }
  }
  SUBCASE("bands span the independent quartiles") {
    const std::string path = out + "/band.csv";
    {
      std::ofstream csv(path);
      csv << kCsvHeader << "\n";
      std::mt19937_64 rng(5);
      std::uniform_real_distribution<double> unif(0.5, 2.0);
      for (int rep = 0; rep < 10; ++rep)
        for (long samples : {10L, 100L, 1000L}) {
          ExperimentRow row;
          row.run_id = "x";
          row.optimizer = "opt";
          row.replication = rep;
          row.record.samples_seen = samples;
          row.record.theta_err = unif(rng) / static_cast<double>(samples);
          csv << csv_row(row) << "\n";
        }
    }
    const PlotData data = compute_plot_data(path, "theta_err");
    REQUIRE(data.series.size() == 1);
    REQUIRE(data.series[0].points.size() == 3);

    // Independent quantile route: sort and interpolate at h = q (n - 1).
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::map<long, std::vector<double>> values;
    while (std::getline(in, line)) {
      std::vector<std::string> fields;
      std::istringstream ls(line);
      std::string f;
      while (std::getline(ls, f, ',')) fields.push_back(f);
      values[std::stol(fields[3])].push_back(std::stod(fields[4]));
    }
    for (const auto& point : data.series[0].points) {
      auto v = values[point.samples_seen];
      std::sort(v.begin(), v.end());
      auto interp = [&v](double q) {
        const double h = q * (static_cast<double>(v.size()) - 1.0);
        const size_t lo = static_cast<size_t>(h);
        const double frac = h - static_cast<double>(lo);
        return v[lo] + frac * (v[std::min(lo + 1, v.size() - 1)] - v[lo]);
      };
      CHECK(point.q25 == doctest::Approx(interp(0.25)).epsilon(1e-12));
      CHECK(point.median == doctest::Approx(interp(0.5)).epsilon(1e-12));
      CHECK(point.q75 == doctest::Approx(interp(0.75)).epsilon(1e-12));
      CHECK(point.replications == 10);
    }

    const auto written = emit_plots(path, {"theta_err"}, out);
    REQUIRE(written.size() == 1);
    const std::string svg = read_file(written[0]);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("fill-opacity") != std::string::npos);  // the band
  }
  SUBCASE("single replication draws no band") {
    const std::string path = out + "/single.csv";
    {
      std::ofstream csv(path);
      csv << kCsvHeader << "\n";
      for (long samples : {10L, 100L}) {
        ExperimentRow row;
        row.run_id = "x";
        row.optimizer = "only";
        row.record.samples_seen = samples;
        row.record.theta_err = 1.0 / samples;
        csv << csv_row(row) << "\n";
      }
    }
    const PlotData data = compute_plot_data(path, "theta_err");
    CHECK(data.series[0].points[0].replications == 1);
    const std::string svg_path = out + "/single.svg";
    emit_plot_svg(data, svg_path);
    const std::string svg = read_file(svg_path);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("fill-opacity") == std::string::npos);
  }
}

TEST_CASE("iterate snapshot round trip") {
  const std::string out = scratch_dir("vec_snap");
  Vector v(4);
  v << 1.0, -2.0, 3.5, 0.25;
  write_iterate_snapshot(out + "/v.theta", v, 9);
  const IterateSnapshot snap = read_iterate_snapshot(out + "/v.theta");
  CHECK(snap.iteration == 9);
  CHECK((snap.iterate - v).norm() == 0.0);
}

}  // TEST_SUITE
