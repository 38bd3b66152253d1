#include <CLI11.hpp>

#include "msna/harness.hpp"
#include "msna/plot.hpp"
#include "msna/verify.hpp"

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Streaming masked stochastic Newton benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int workers_override = -1;
  bool paper_scale = false;
  auto* run_cmd = app.add_subcommand("run", "Execute the experiments described by a config file");
  run_cmd->add_option("--config", config_path, "JSON run configuration")->required();
  run_cmd->add_option("--out", out_override, "Output directory (overrides the config)");
  run_cmd->add_option("--workers", workers_override, "Worker pool size (overrides the config)");
  run_cmd->add_flag("--paper-scale", paper_scale,
                    "Apply the config's paper_scale overrides (full-size runs)");

  std::string csv_path;
  std::vector<std::string> metrics{"theta_err"};
  std::string plot_out = "plots";
  auto* plot_cmd = app.add_subcommand("plot", "Render log-log SVG curves from a run CSV");
  plot_cmd->add_option("--csv", csv_path, "Run CSV produced by `bench run`")->required();
  plot_cmd->add_option("--metric", metrics, "Metric column(s) to plot");
  plot_cmd->add_option("--out", plot_out, "Directory for the SVG files");

  std::uint64_t verify_seed = 20240601;
  auto* verify_cmd = app.add_subcommand("verify", "Run the independent-oracle self checks");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the randomized checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      msna::RunConfig config = msna::load_run_config(config_path, paper_scale);
      if (!out_override.empty()) config.out_dir = out_override;
      if (workers_override >= 0) config.workers = workers_override;
      const msna::ExperimentResult result = msna::run_experiment(config);
      std::cout << "wrote " << result.rows.size() << " rows to " << result.csv_path << "\n";
      std::cout << "metadata: " << result.meta_path << "\n";
      for (const auto& note : result.notes) std::cout << "note: " << note << "\n";
      return result.rows.empty() ? 1 : 0;
    }
    if (plot_cmd->parsed()) {
      const auto written = msna::emit_plots(csv_path, metrics, plot_out);
      for (const auto& path : written) std::cout << "wrote " << path << "\n";
      return 0;
    }
    if (verify_cmd->parsed()) {
      const msna::VerifyReport report = msna::run_verify_suite(verify_seed);
      for (const auto& check : report.checks)
        std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << " (" << check.detail
                  << ")\n";
      std::cout << (report.all_passed() ? "all checks passed" : "CHECKS FAILED") << "\n";
      return report.all_passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
