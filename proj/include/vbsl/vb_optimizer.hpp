#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "vbsl/gaussian_variational.hpp"
#include "vbsl/model.hpp"

namespace vbsl {

enum class EstimatorKind { vbsl, vbil, exact };
enum class ParametrizationKind { natural, cholesky };
enum class StepRuleKind { fixed, adaptive, adadelta };

struct NParticlePolicy {
  bool adaptive = false;
  int n_fixed = 50;
  AdaptiveParticleConfig adapt;
};

// One log-likelihood estimate per parameter draw, wired to the configured
// estimator and particle policy.
class LogLikEvaluator {
 public:
  LogLikEvaluator(EstimatorKind kind, NParticlePolicy policy, double abc_epsilon = 0.0)
      : kind_(kind), policy_(policy), abc_epsilon_(abc_epsilon) {}

  LogLikEstimate operator()(const SimulatorModel& model, const Eigen::VectorXd& theta,
                            RngStream& rng) const;

 private:
  EstimatorKind kind_;
  NParticlePolicy policy_;
  double abc_epsilon_;
};

struct GradientEstimate {
  Eigen::VectorXd hhat;   // averaged score-weighted integrand
  double lb = 0.0;        // mean of h_hat - log q over the draws
  Eigen::VectorXd cvec;   // fresh per-coordinate control variates
  long sims_used = 0;
  int failed_draws = 0;   // estimator failures / -inf estimates in the batch
};

// Draws S parameters from q, estimates the lower-bound gradient with the
// log-derivative trick and control variates c_prev, and returns fresh
// control variates fitted on the same draws.  Each draw s uses the child
// stream (seed, phase, s), so the result is identical for any thread count.
template <class Param>
GradientEstimate estimate_gradient(const Param& q, const SimulatorModel& model,
                                   const LogLikEvaluator& eval, int sample_count,
                                   const Eigen::VectorXd& c_prev, std::uint64_t seed,
                                   std::uint64_t phase, int threads);

template <class Param>
struct StepOutcome {
  Param params;
  bool rejected = false;
};

// lambda + rho * direction.  In the natural parametrization a proposal whose
// implied covariance is not positive definite is rejected (parameters kept);
// in the Cholesky parametrization the diagonal of C is floored at 1e-8 in
// magnitude instead.
StepOutcome<NaturalGaussianParams> apply_step(const NaturalGaussianParams& q,
                                              const Eigen::VectorXd& direction, double rho);
StepOutcome<CholeskyGaussianParams> apply_step(const CholeskyGaussianParams& q,
                                               const Eigen::VectorXd& direction, double rho);

struct AdaptiveRateState {
  Eigen::VectorXd nbar;
  double cbar = 1.0;
  double alpha = 1.0;
  double rho = 0.0;
};

// Signal-to-noise learning rate: running averages of the natural gradient
// and its squared norm give rho = |nbar|^2 / cbar, capped at sqrt(dim/cbar),
// with the discount factor alpha re-weighted after each step.
AdaptiveRateState adaptive_rate_update(AdaptiveRateState state, const Eigen::VectorXd& nhat,
                                       int dim);

struct AdadeltaState {
  Eigen::VectorXd acc_grad_sq;
  Eigen::VectorXd acc_step_sq;
  double decay = 0.95;
  double epsilon = 1e-6;
};

// Per-coordinate ascent step from the ordinary gradient.
Eigen::VectorXd adadelta_step(AdadeltaState& state, const Eigen::VectorXd& grad);

struct StoppingRule {
  bool plateau = false;
  int window = 10;
  double tolerance = 0.01;
  int consecutive = 3;
};

struct IterationRecord {
  int iteration = 0;
  double lb = 0.0;
  double rho = 0.0;
  long sims = 0;
  long cum_sims = 0;
  bool rejected = false;
  int failed_draws = 0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mean;  // variational mean, kept for reporting
};

struct OptimizerTrace {
  std::vector<IterationRecord> records;  // records[0] is the initialization
  long total_sims = 0;
  bool aborted = false;
  std::string abort_reason;
  Eigen::VectorXd final_mean;
  Eigen::MatrixXd final_cov;
};

struct OptimizerConfig {
  EstimatorKind estimator = EstimatorKind::vbsl;
  ParametrizationKind parametrization = ParametrizationKind::natural;
  StepRuleKind step_rule = StepRuleKind::fixed;
  double fixed_rate_offset = 5.0;  // rho_t = 1 / (offset + t)
  int rate_init_count = 5;         // K gradient estimates seeding the adaptive rate
  bool cap_uses_param_dim = false; // step cap dimension: dim(lambda) or p
  double adadelta_decay = 0.95;
  double adadelta_epsilon = 1e-6;
  int sample_count = 100;  // S
  NParticlePolicy n_policy;
  double abc_epsilon = 0.0;
  int iterations = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  int max_nonfinite_iters = 10;
  StoppingRule stopping;
  Eigen::VectorXd init_mean;
  Eigen::MatrixXd init_cov;
};

OptimizerTrace run_vb(const OptimizerConfig& config, const SimulatorModel& model);

}  // namespace vbsl
