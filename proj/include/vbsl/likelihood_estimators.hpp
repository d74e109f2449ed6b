#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "vbsl/rng.hpp"

namespace vbsl {

// Simulated summaries at a fixed parameter value; one column per draw.
struct SummaryBatch {
  Eigen::MatrixXd samples;  // d x N
  int dim() const { return static_cast<int>(samples.rows()); }
  long n() const { return samples.cols(); }
  void append(const SummaryBatch& more);
};

struct EmpiricalMoments {
  Eigen::VectorXd mean;  // divisor N
  Eigen::MatrixXd cov;   // divisor N - 1
  long n = 0;
};

struct LogLikEstimate {
  double value = 0.0;  // log scale
  long particles = 0;
  std::optional<double> var_estimate;  // estimated variance of the estimator
  bool capped = false;                 // adaptive rule hit its hard cap
};

// Raised when a sample covariance stays singular after the one-shot jitter.
class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

EmpiricalMoments empirical_moments(const SummaryBatch& batch);

// log phi(s; mu_hat, Sigma_hat) with the plug-in moments.
double plugin_sl_logdensity(const Eigen::VectorXd& s, const EmpiricalMoments& m);

// Log of the unbiased normal-density estimate built from N simulated
// summaries.  Requires N > d + 3.  Returns -inf when the shrunk scatter
// matrix minus the outer product of the residual is not positive definite.
double unbiased_sl_density_log(const Eigen::VectorXd& s, const SummaryBatch& batch);

// Unbiased estimate of log phi(s; mu, Sigma): the plug-in log density with a
// digamma log-determinant correction, a (N-d-2)/(N-1) shrinkage of the
// quadratic form and a +d/N constant.  Requires N > d + 2.  The variance
// estimate splits the particles into groups and scales the between-group
// variance down by the group count.
LogLikEstimate unbiased_log_sl(const Eigen::VectorXd& s, const SummaryBatch& batch);

// log (1/N) sum_i K_eps(s, S_i) with the Gaussian kernel
// (2 pi eps)^{-d/2} exp(-||s - S_i||^2 / (2 eps)), via log-sum-exp.
// The variance estimate is the delta-method value Var(w)/(N w_bar^2).
LogLikEstimate abc_loglik(const Eigen::VectorXd& s, const SummaryBatch& batch, double epsilon);

struct AdaptiveParticleConfig {
  int n_min = 50;
  double target_var = 0.1;
  int increment = 50;
  long hard_cap = 0;  // 0 means 100 * n_min
};

struct AdaptiveResult {
  LogLikEstimate estimate;
  SummaryBatch batch;
};

using SimulateFn = std::function<SummaryBatch(int count, RngStream& rng)>;
using BatchEstimateFn = std::function<LogLikEstimate(const SummaryBatch& batch)>;

// Simulates n_min particles, then keeps adding `increment` more until the
// estimator's variance estimate is at or below target_var or the hard cap is
// reached.  The final estimate always uses the full batch.
AdaptiveResult adaptive_particles(const SimulateFn& simulate, const BatchEstimateFn& estimate,
                                  const AdaptiveParticleConfig& cfg, RngStream& rng);

}  // namespace vbsl
