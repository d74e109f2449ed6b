#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vbsl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-free variational inference runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string compare_out;
  std::vector<std::string> report_paths;
  std::uint64_t seed = 0;
  int threads = 0;
  double delta = 1.0;

  auto* run = app.add_subcommand("run", "Execute the experiment described by a config file");
  run->add_option("config", config_path, "Path to the JSON run config")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  auto* out_opt = run->add_option("--out-dir", out_dir, "Override the output directory");
  auto* thr_opt = run->add_option("--threads", threads, "Override the worker thread count");

  auto* validate = app.add_subcommand("validate", "Check a config file and exit");
  validate->add_option("config", config_path, "Path to the JSON run config")->required();

  auto* compare = app.add_subcommand("compare", "Tabulate two or more run reports");
  compare->add_option("reports", report_paths, "Report JSON files")->required()->expected(-2);
  compare->add_option("--delta", delta, "Lower-bound closeness threshold for the iteration count");
  compare->add_option("--out", compare_out, "Write the table to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) {
      vbsl::RunOverrides ov;
      if (seed_opt->count() > 0) ov.seed = seed;
      if (out_opt->count() > 0) ov.out_dir = out_dir;
      if (thr_opt->count() > 0) ov.threads = threads;
      const auto outputs = vbsl::run_experiment(config_path, ov);
      std::cout << "report: " << outputs.report_path << '\n'
                << "trace:  " << outputs.trace_path << '\n';
      return 0;
    }
    if (app.got_subcommand(validate)) {
      const auto problems = vbsl::validate_config_file(config_path);
      if (problems.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      for (const auto& p : problems) std::cerr << "error: " << p << '\n';
      return 1;
    }
    if (app.got_subcommand(compare)) {
      const std::string table = vbsl::compare_runs(report_paths, delta);
      if (compare_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream f(compare_out);
        f << table;
      }
      return 0;
    }
  } catch (const vbsl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
