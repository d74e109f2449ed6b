#include "vbsl/pseudo_marginal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "vbsl/matrix_calculus.hpp"

namespace vbsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<ChainState> pm_mh(const SimulatorModel& model, const PmMhConfig& cfg) {
  const int d = model.summary_dim();
  const int p = model.param_dim();
  if (cfg.n_particles <= d + 3)
    throw std::invalid_argument("pm_mh: N > d + 3 required by the density estimate");
  if (cfg.theta0.size() != p) throw std::invalid_argument("pm_mh: theta0 has wrong length");
  if (cfg.proposal_cov.rows() != p || cfg.proposal_cov.cols() != p)
    throw std::invalid_argument("pm_mh: proposal covariance has wrong shape");

  const bool frozen = cfg.proposal_cov.isZero(0.0);
  const MatrixXd prop_chol =
      frozen ? MatrixXd::Zero(p, p) : matcalc::chol_lower(cfg.proposal_cov);

  RngStream rng(cfg.seed);
  const VectorXd& s = model.observed_summary();

  const auto estimate = [&](const VectorXd& theta) -> double {
    const SummaryBatch batch = model.simulate_summaries(theta, cfg.n_particles, rng);
    return unbiased_sl_density_log(s, batch);
  };

  ChainState state;
  state.theta = cfg.theta0;
  state.log_prior = model.log_prior(state.theta);
  state.log_like = estimate(state.theta);
  if (!std::isfinite(state.log_like))
    throw std::runtime_error("pm_mh: initial likelihood estimate is degenerate");

  std::vector<ChainState> chain;
  chain.reserve(cfg.iterations + 1);
  chain.push_back(state);

  for (long it = 0; it < cfg.iterations; ++it) {
    const VectorXd proposal = state.theta + prop_chol * rng.normal_vector(p);
    double ll = -std::numeric_limits<double>::infinity();
    bool usable = true;
    try {
      ll = estimate(proposal);
    } catch (const std::exception&) {
      usable = false;
    }
    state.accepted = false;
    if (usable && std::isfinite(ll)) {
      const double lp = model.log_prior(proposal);
      const double log_ratio = lp + ll - state.log_prior - state.log_like;
      if (std::log(rng.uniform()) < log_ratio) {
        state.theta = proposal;
        state.log_like = ll;
        state.log_prior = lp;
        state.accepted = true;
      }
    }
    chain.push_back(state);
  }
  return chain;
}

}  // namespace vbsl
