#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vbsl/likelihood_estimators.hpp"
#include "vbsl/rng.hpp"

namespace vbsl {

// Monotone per-coordinate map between the unconstrained working scale and
// the model's reporting (natural) scale.
struct ScalarTransform {
  std::string name = "identity";
  std::function<double(double)> natural_from_working = [](double w) { return w; };
  std::function<double(double)> working_from_natural = [](double x) { return x; };
  // d(working)/d(natural), for change of variables in reported densities.
  std::function<double(double)> dworking_dnatural = [](double) { return 1.0; };
};

// Contract for a stochastic simulation model: it simulates summary
// statistics at a working-scale parameter, evaluates the prior on the same
// scale (any Jacobian it wants is baked in) and maps parameters back to the
// reporting scale.  Simulation must be deterministic given the RNG stream.
class SimulatorModel {
 public:
  virtual ~SimulatorModel() = default;

  virtual std::string id() const = 0;
  virtual int param_dim() const = 0;    // p
  virtual int summary_dim() const = 0;  // d
  virtual const Eigen::VectorXd& observed_summary() const = 0;

  virtual SummaryBatch simulate_summaries(const Eigen::VectorXd& theta, int count,
                                          RngStream& rng) const = 0;
  virtual double log_prior(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd to_natural_scale(const Eigen::VectorXd& theta) const;
  virtual const std::vector<ScalarTransform>& transforms() const = 0;

  // Exact log likelihood of the observed summary, when the model has one.
  virtual std::optional<double> exact_log_like(const Eigen::VectorXd&) const {
    return std::nullopt;
  }
};

inline Eigen::VectorXd SimulatorModel::to_natural_scale(const Eigen::VectorXd& theta) const {
  const auto& tr = transforms();
  Eigen::VectorXd out(theta.size());
  for (int i = 0; i < theta.size(); ++i)
    out[i] = tr[static_cast<std::size_t>(i)].natural_from_working(theta[i]);
  return out;
}

}  // namespace vbsl
