#pragma once

#include <cstdint>
#include <vector>

#include "vbsl/model.hpp"

namespace vbsl {

struct ChainState {
  Eigen::VectorXd theta;
  double log_like = 0.0;   // retained unbiased-density log estimate
  double log_prior = 0.0;
  bool accepted = false;
};

struct PmMhConfig {
  long iterations = 10000;
  Eigen::MatrixXd proposal_cov;
  int n_particles = 50;  // must exceed d + 3
  std::uint64_t seed = 1;
  Eigen::VectorXd theta0;
};

// Gaussian random-walk Metropolis-Hastings on the working scale driven by
// the unbiased synthetic-likelihood density estimate.  The estimate at the
// current state is carried and only replaced on acceptance; a proposal whose
// estimate is -inf (or whose estimator fails) is rejected.
std::vector<ChainState> pm_mh(const SimulatorModel& model, const PmMhConfig& config);

}  // namespace vbsl
