#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbsl/model.hpp"
#include "vbsl/pseudo_marginal.hpp"
#include "vbsl/vb_optimizer.hpp"

namespace vbsl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fully validated run description.  Defaults are filled in during parsing so
// the echoed config in the report describes the run completely.
struct RunConfig {
  nlohmann::json echo;        // config with every default made explicit
  nlohmann::json model_spec;  // the "model" section
  std::string estimator;      // vbsl | vbil | exact | pm-mh
  OptimizerConfig optimizer;  // used by the vb estimators
  bool init_mean_from_summary = false;
  // pm-mh settings
  Eigen::MatrixXd pm_proposal_cov;
  long pm_burn_in = 0;
  std::string out_dir = ".";
  std::string prefix = "run";

  static RunConfig parse(const nlohmann::json& j, const std::string& base_dir);
};

std::unique_ptr<SimulatorModel> build_model(const nlohmann::json& model_spec,
                                            const std::string& base_dir);

// Reads a whitespace- or comma-delimited numeric matrix, one observation per
// row; lines starting with '#' are skipped.
Eigen::MatrixXd read_delimited_matrix(const std::string& path);

struct RunOutputs {
  std::string report_path;
  std::string trace_path;
  std::vector<std::string> grid_paths;
  nlohmann::json report;
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

RunOutputs run_experiment(const std::string& config_path, const RunOverrides& overrides = {});

// Validates a config file; returns the list of problems (empty when valid).
std::vector<std::string> validate_config_file(const std::string& config_path);

// Renders the comparison table for two or more reports over the same model:
// final (smoothed) lower bound, iterations to get within `delta` of the best
// final lower bound, total simulations, and per-parameter posterior rows.
std::string compare_runs(const std::vector<std::string>& report_paths, double delta = 1.0);

// Trailing moving average used when reading off an attained lower bound.
double smoothed_final_lb(const std::vector<double>& lb, int window = 10);

}  // namespace vbsl
