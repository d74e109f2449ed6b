#include "vbsl/vb_optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "vbsl/matrix_calculus.hpp"

namespace vbsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDiagFloor = 1e-8;
constexpr double kVarGuard = 1e-12;   // guards the control-variate denominator
constexpr double kFailPenalty = 10.0; // failed draw: min finite h_hat minus this
}  // namespace

LogLikEstimate LogLikEvaluator::operator()(const SimulatorModel& model, const VectorXd& theta,
                                           RngStream& rng) const {
  if (kind_ == EstimatorKind::exact) {
    const auto value = model.exact_log_like(theta);
    if (!value) throw std::runtime_error("exact estimator requested but model has none");
    return {*value, 0, std::nullopt, false};
  }
  const VectorXd& s = model.observed_summary();
  const auto estimate = [&](const SummaryBatch& batch) {
    return kind_ == EstimatorKind::vbsl ? unbiased_log_sl(s, batch)
                                        : abc_loglik(s, batch, abc_epsilon_);
  };
  if (!policy_.adaptive) {
    const SummaryBatch batch = model.simulate_summaries(theta, policy_.n_fixed, rng);
    return estimate(batch);
  }
  const auto simulate = [&](int count, RngStream& r) {
    return model.simulate_summaries(theta, count, r);
  };
  return adaptive_particles(simulate, estimate, policy_.adapt, rng).estimate;
}

namespace {

struct DrawResult {
  double h = kNegInf;     // log prior + log-likelihood estimate
  double log_q = 0.0;
  VectorXd score;
  long sims = 0;
  bool failed = false;
};

template <class Param>
void evaluate_range(const Param& q, const SimulatorModel& model, const LogLikEvaluator& eval,
                    std::uint64_t seed, std::uint64_t phase, int begin, int end,
                    std::vector<DrawResult>& out) {
  for (int s = begin; s < end; ++s) {
    RngStream rng = RngStream::child(seed, phase, static_cast<std::uint64_t>(s));
    DrawResult& r = out[s];
    const VectorXd theta = q.sample(rng);
    r.log_q = q.log_density(theta);
    r.score = q.score(theta);
    try {
      const LogLikEstimate est = eval(model, theta, rng);
      r.sims = est.particles;
      if (std::isfinite(est.value)) {
        r.h = model.log_prior(theta) + est.value;
      } else {
        r.failed = true;
      }
    } catch (const std::exception&) {
      r.failed = true;
    }
  }
}

}  // namespace

template <class Param>
GradientEstimate estimate_gradient(const Param& q, const SimulatorModel& model,
                                   const LogLikEvaluator& eval, int sample_count,
                                   const VectorXd& c_prev, std::uint64_t seed,
                                   std::uint64_t phase, int threads) {
  if (sample_count < 2) throw std::invalid_argument("estimate_gradient: S >= 2 required");
  const int dim = q.lambda_dim();
  if (c_prev.size() != dim) throw std::invalid_argument("estimate_gradient: c has wrong length");

  std::vector<DrawResult> draws(sample_count);
  const int workers = std::max(1, std::min(threads, sample_count));
  if (workers == 1) {
    evaluate_range(q, model, eval, seed, phase, 0, sample_count, draws);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (sample_count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(sample_count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        evaluate_range(q, model, eval, seed, phase, begin, end, draws);
      });
    }
    for (auto& t : pool) t.join();
  }

  GradientEstimate out;
  out.hhat = VectorXd::Zero(dim);
  out.cvec = VectorXd::Zero(dim);

  double min_finite = std::numeric_limits<double>::infinity();
  for (const auto& r : draws) {
    out.sims_used += r.sims;
    if (r.failed) {
      ++out.failed_draws;
    } else {
      min_finite = std::min(min_finite, r.h);
    }
  }
  if (out.failed_draws == sample_count) {
    out.lb = kNegInf;
    return out;
  }
  const double penalty_h = min_finite - kFailPenalty;

  VectorXd f(sample_count);
  for (int s = 0; s < sample_count; ++s)
    f[s] = (draws[s].failed ? penalty_h : draws[s].h) - draws[s].log_q;
  out.lb = f.mean();

  // hhat_i = mean_s (f_s - c_i) g_si; fresh c_i = cov(f g_i, g_i) / var(g_i).
  for (int i = 0; i < dim; ++i) {
    double g_mean = 0.0, fg_mean = 0.0;
    for (int s = 0; s < sample_count; ++s) {
      const double g = draws[s].score[i];
      g_mean += g;
      fg_mean += f[s] * g;
    }
    g_mean /= sample_count;
    fg_mean /= sample_count;
    out.hhat[i] = fg_mean - c_prev[i] * g_mean;

    double cov = 0.0, var = 0.0;
    for (int s = 0; s < sample_count; ++s) {
      const double g = draws[s].score[i];
      const double u = f[s] * g - fg_mean;
      cov += u * (g - g_mean);
      var += (g - g_mean) * (g - g_mean);
    }
    cov /= (sample_count - 1);
    var /= (sample_count - 1);
    out.cvec[i] = cov / (var + kVarGuard);
  }
  if (!out.hhat.allFinite() || !out.cvec.allFinite()) {
    out.lb = kNegInf;  // degenerate iteration, caller skips the update
    out.hhat.setZero();
    out.cvec.setZero();
  }
  return out;
}

template GradientEstimate estimate_gradient<NaturalGaussianParams>(
    const NaturalGaussianParams&, const SimulatorModel&, const LogLikEvaluator&, int,
    const VectorXd&, std::uint64_t, std::uint64_t, int);
template GradientEstimate estimate_gradient<CholeskyGaussianParams>(
    const CholeskyGaussianParams&, const SimulatorModel&, const LogLikEvaluator&, int,
    const VectorXd&, std::uint64_t, std::uint64_t, int);

StepOutcome<NaturalGaussianParams> apply_step(const NaturalGaussianParams& q,
                                              const VectorXd& direction, double rho) {
  const VectorXd lambda = q.lambda_vec() + rho * direction;
  auto next = NaturalGaussianParams::from_lambda(lambda.head(q.dim()),
                                                 lambda.tail(q.lambda_dim() - q.dim()));
  if (!next) return {q, true};
  return {std::move(*next), false};
}

StepOutcome<CholeskyGaussianParams> apply_step(const CholeskyGaussianParams& q,
                                               const VectorXd& direction, double rho) {
  VectorXd lambda = q.lambda_vec() + rho * direction;
  const int p = q.dim();
  MatrixXd c = matcalc::vech_to_sym(lambda.tail(q.lambda_dim() - p))
                   .triangularView<Eigen::Lower>();
  for (int i = 0; i < p; ++i) {
    double& cii = c(i, i);
    if (std::abs(cii) < kDiagFloor) cii = (cii < 0.0) ? -kDiagFloor : kDiagFloor;
  }
  return {CholeskyGaussianParams(lambda.head(p), c), false};
}

AdaptiveRateState adaptive_rate_update(AdaptiveRateState state, const VectorXd& nhat, int dim) {
  state.nbar = (1.0 - state.alpha) * state.nbar + state.alpha * nhat;
  state.cbar = (1.0 - state.alpha) * state.cbar + state.alpha * nhat.squaredNorm();
  const double rho = state.nbar.squaredNorm() / state.cbar;
  const double cap = std::sqrt(static_cast<double>(dim) / state.cbar);
  state.rho = std::min(rho, cap);
  state.alpha = 1.0 / ((1.0 - state.rho) / state.alpha + 1.0);
  return state;
}

VectorXd adadelta_step(AdadeltaState& state, const VectorXd& grad) {
  if (state.acc_grad_sq.size() != grad.size()) {
    state.acc_grad_sq = VectorXd::Zero(grad.size());
    state.acc_step_sq = VectorXd::Zero(grad.size());
  }
  state.acc_grad_sq = state.decay * state.acc_grad_sq.array() +
                      (1.0 - state.decay) * grad.array().square();
  const Eigen::ArrayXd rate = ((state.acc_step_sq.array() + state.epsilon) /
                               (state.acc_grad_sq.array() + state.epsilon))
                                  .sqrt();
  const VectorXd step = (rate * grad.array()).matrix();
  state.acc_step_sq = state.decay * state.acc_step_sq.array() +
                      (1.0 - state.decay) * step.array().square();
  return step;
}

namespace {

template <class Param>
OptimizerTrace run_loop(Param q, const OptimizerConfig& cfg, const SimulatorModel& model) {
  const LogLikEvaluator eval(cfg.estimator, cfg.n_policy, cfg.abc_epsilon);
  OptimizerTrace trace;
  const int dim = q.lambda_dim();
  long cum_sims = 0;

  // Step 1: one batch at lambda(0) seeds the control variates.
  GradientEstimate init =
      estimate_gradient(q, model, eval, cfg.sample_count, VectorXd::Zero(dim), cfg.seed, 0, cfg.threads);
  VectorXd c = init.cvec;
  cum_sims += init.sims_used;

  AdaptiveRateState rate;
  AdadeltaState ada;
  ada.decay = cfg.adadelta_decay;
  ada.epsilon = cfg.adadelta_epsilon;
  const int cap_dim = cfg.cap_uses_param_dim ? q.dim() : dim;

  if (cfg.step_rule == StepRuleKind::adaptive) {
    // K independent gradient estimates at the start seed nbar/cbar; alpha = 1/K.
    const int k = std::max(1, cfg.rate_init_count);
    VectorXd nbar = VectorXd::Zero(dim);
    double cbar = 0.0;
    for (int j = 0; j < k; ++j) {
      const GradientEstimate ge =
          estimate_gradient(q, model, eval, cfg.sample_count, c, cfg.seed,
                            1000000000ULL + static_cast<std::uint64_t>(j), cfg.threads);
      cum_sims += ge.sims_used;
      if (!std::isfinite(ge.lb)) continue;
      const VectorXd nhat = q.natural_gradient(ge.hhat);
      nbar += nhat / k;
      cbar += nhat.squaredNorm() / k;
    }
    if (cbar <= 0.0) cbar = 1.0;
    rate = {nbar, cbar, 1.0 / k, 0.0};
  }

  IterationRecord rec0;
  rec0.iteration = 0;
  rec0.lb = init.lb;
  rec0.sims = cum_sims;
  rec0.cum_sims = cum_sims;
  rec0.failed_draws = init.failed_draws;
  rec0.lambda = q.lambda_vec();
  rec0.mean = q.mean();
  trace.records.push_back(std::move(rec0));

  int nonfinite_run = 0;
  int plateau_hits = 0;
  double last_window_avg = kNegInf;
  std::vector<double> lb_history;

  for (int t = 1; t <= cfg.iterations; ++t) {
    GradientEstimate ge = estimate_gradient(q, model, eval, cfg.sample_count, c, cfg.seed,
                                            1 + static_cast<std::uint64_t>(t), cfg.threads);
    cum_sims += ge.sims_used;

    IterationRecord rec;
    rec.iteration = t;
    rec.lb = ge.lb;
    rec.sims = ge.sims_used;
    rec.cum_sims = cum_sims;
    rec.failed_draws = ge.failed_draws;

    if (!std::isfinite(ge.lb)) {
      ++nonfinite_run;
      rec.lambda = q.lambda_vec();
      rec.mean = q.mean();
      trace.records.push_back(std::move(rec));
      if (nonfinite_run > cfg.max_nonfinite_iters) {
        trace.aborted = true;
        trace.abort_reason = "lower bound non-finite for more than " +
                             std::to_string(cfg.max_nonfinite_iters) + " consecutive iterations";
        break;
      }
      continue;
    }
    nonfinite_run = 0;
    c = ge.cvec;

    double rho = 0.0;
    bool rejected = false;
    if (cfg.step_rule == StepRuleKind::adadelta) {
      const VectorXd step = adadelta_step(ada, ge.hhat);
      rho = std::sqrt((step.squaredNorm() + 1e-300) / (ge.hhat.squaredNorm() + 1e-300));
      auto outcome = apply_step(q, step, 1.0);
      q = std::move(outcome.params);
      rejected = outcome.rejected;
    } else {
      const VectorXd direction = q.natural_gradient(ge.hhat);
      if (cfg.step_rule == StepRuleKind::adaptive) {
        rate = adaptive_rate_update(rate, direction, cap_dim);
        rho = rate.rho;
      } else {
        rho = 1.0 / (cfg.fixed_rate_offset + t);
      }
      auto outcome = apply_step(q, direction, rho);
      q = std::move(outcome.params);
      rejected = outcome.rejected;
    }

    rec.rho = rho;
    rec.rejected = rejected;
    rec.lambda = q.lambda_vec();
    rec.mean = q.mean();
    trace.records.push_back(std::move(rec));

    if (cfg.stopping.plateau) {
      lb_history.push_back(ge.lb);
      const int w = cfg.stopping.window;
      if (static_cast<int>(lb_history.size()) >= w &&
          static_cast<int>(lb_history.size()) % w == 0) {
        double avg = 0.0;
        for (int i = 0; i < w; ++i) avg += lb_history[lb_history.size() - 1 - i];
        avg /= w;
        if (std::isfinite(last_window_avg) &&
            std::abs(avg - last_window_avg) < cfg.stopping.tolerance) {
          if (++plateau_hits >= cfg.stopping.consecutive) break;
        } else {
          plateau_hits = 0;
        }
        last_window_avg = avg;
      }
    }
  }

  trace.total_sims = cum_sims;
  trace.final_mean = q.mean();
  trace.final_cov = q.covariance();
  return trace;
}

}  // namespace

OptimizerTrace run_vb(const OptimizerConfig& cfg, const SimulatorModel& model) {
  if (cfg.init_mean.size() != model.param_dim())
    throw std::invalid_argument("run_vb: init mean has wrong length");
  if (cfg.init_cov.rows() != model.param_dim() || cfg.init_cov.cols() != model.param_dim())
    throw std::invalid_argument("run_vb: init covariance has wrong shape");
  if (cfg.step_rule == StepRuleKind::adadelta &&
      cfg.parametrization != ParametrizationKind::cholesky)
    throw std::invalid_argument("run_vb: adadelta requires the cholesky parametrization");

  if (cfg.parametrization == ParametrizationKind::natural)
    return run_loop(NaturalGaussianParams::from_moments(cfg.init_mean, cfg.init_cov), cfg, model);
  return run_loop(CholeskyGaussianParams::from_moments(cfg.init_mean, cfg.init_cov), cfg, model);
}

}  // namespace vbsl
