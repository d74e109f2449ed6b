#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vbsl/models/normal_location.hpp"
#include "vbsl/vb_optimizer.hpp"
#include "test_helpers.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace vbsl;

namespace {

NaturalGaussianParams posterior_params(const NormalLocationModel& model) {
  const auto post = model.exact_posterior();
  return NaturalGaussianParams::from_moments(VectorXd::Constant(1, post.mean),
                                             MatrixXd::Constant(1, 1, post.var));
}

// Scalar-case Fisher information Cov(T) for the natural parametrization.
MatrixXd fisher_1d(double mu, double var) {
  MatrixXd f(2, 2);
  f << var, 2.0 * mu * var, 2.0 * mu * var, 2.0 * var * var + 4.0 * mu * mu * var;
  return f;
}

struct FailingModel : SimulatorModel {
  VectorXd s = VectorXd::Zero(2);
  std::vector<ScalarTransform> tr{2};
  std::string id() const override { return "failing"; }
  int param_dim() const override { return 2; }
  int summary_dim() const override { return 2; }
  const VectorXd& observed_summary() const override { return s; }
  SummaryBatch simulate_summaries(const VectorXd&, int, RngStream&) const override {
    throw std::runtime_error("simulator always fails");
  }
  double log_prior(const VectorXd&) const override { return 0.0; }
  const std::vector<ScalarTransform>& transforms() const override { return tr; }
};

}  // namespace

TEST_CASE("gradient estimate vanishes at the optimum of the conjugate toy") {
  const auto model = NormalLocationModel::zeros(4);
  const auto q = posterior_params(model);
  const LogLikEvaluator eval(EstimatorKind::exact, NParticlePolicy{});
  const int reps = 300;
  MatrixXd hh(2, reps);
  VectorXd c = VectorXd::Zero(2);
  for (int r = 0; r < reps; ++r) {
    const auto ge = estimate_gradient(q, model, eval, 100, c, 900 + r, 0, 1);
    hh.col(r) = ge.hhat;
    c = ge.cvec;
  }
  const VectorXd mean = hh.rowwise().mean();
  const MatrixXd centered = hh.colwise() - mean;
  const VectorXd se =
      (centered.array().square().rowwise().sum() / (reps - 1.0) / reps).sqrt();
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i]) < 4.0 * se[i]);
}

TEST_CASE("lower bound estimate at the optimum equals the attainable bound") {
  const auto model = NormalLocationModel::zeros(4);
  const auto q = posterior_params(model);
  const LogLikEvaluator eval(EstimatorKind::exact, NParticlePolicy{});
  const auto ge =
      estimate_gradient(q, model, eval, 2000, VectorXd::Zero(2), 7, 0, 1);
  // With the exact likelihood the integrand is constant at the optimum.
  CHECK(ge.lb == doctest::Approx(model.log_marginal()).epsilon(1e-9));
  CHECK(ge.lb / model.n() == doctest::Approx(model.lb_vbsl()).epsilon(1e-9));
}

TEST_CASE("control variates cut per-component gradient variance") {
  const auto model = NormalLocationModel::zeros(4);
  // Off-optimum value so the gradient signal is non-trivial.
  const auto q = NaturalGaussianParams::from_moments(VectorXd::Constant(1, 0.5),
                                                     MatrixXd::Constant(1, 1, 0.6));
  NParticlePolicy npol;
  npol.n_fixed = 50;
  const LogLikEvaluator eval(EstimatorKind::vbsl, npol);

  // Pilot control variates from an independent batch.
  const VectorXd c_pilot =
      estimate_gradient(q, model, eval, 2000, VectorXd::Zero(2), 999, 0, 1).cvec;

  const int reps = 200;
  MatrixXd with_cv(2, reps), without(2, reps);
  for (int r = 0; r < reps; ++r) {
    // Same child streams for both calls: identical draws, different c.
    with_cv.col(r) = estimate_gradient(q, model, eval, 100, c_pilot, 1234, r, 1).hhat;
    without.col(r) = estimate_gradient(q, model, eval, 100, VectorXd::Zero(2), 1234, r, 1).hhat;
  }
  int reduced = 0;
  for (int i = 0; i < 2; ++i) {
    const double v_cv =
        (with_cv.row(i).array() - with_cv.row(i).mean()).square().sum() / (reps - 1.0);
    const double v_plain =
        (without.row(i).array() - without.row(i).mean()).square().sum() / (reps - 1.0);
    if (v_cv < v_plain) ++reduced;
  }
  CHECK(reduced == 2);

  // And they leave the estimator mean unchanged: the paired difference is
  // -c_i * mean(score_i), which has expectation zero.
  for (int i = 0; i < 2; ++i) {
    const Eigen::ArrayXd diff = with_cv.row(i).array() - without.row(i).array();
    const double mean = diff.mean();
    const double se = std::sqrt((diff - mean).square().sum() / (reps - 1.0) / reps);
    CHECK(std::abs(mean) < 4.0 * se + 1e-12);
  }
}

TEST_CASE("natural step: rho = 0 keeps lambda and accepts") {
  const auto q = NaturalGaussianParams::from_moments(VectorXd::Constant(1, 0.2),
                                                     MatrixXd::Constant(1, 1, 1.5));
  const auto out = apply_step(q, VectorXd::Constant(2, 123.0), 0.0);
  CHECK_FALSE(out.rejected);
  CHECK((out.params.lambda_vec() - q.lambda_vec()).norm() == 0.0);
}

TEST_CASE("natural step rejects a proposal with non-PD covariance") {
  const auto q = NaturalGaussianParams::from_moments(VectorXd::Zero(1),
                                                     MatrixXd::Identity(1, 1));
  // lambda2 = -1/2; a step of +1 in lambda2 gives +1/2 -> negative precision.
  VectorXd dir(2);
  dir << 0.0, 1.0;
  const auto out = apply_step(q, dir, 1.0);
  CHECK(out.rejected);
  CHECK((out.params.lambda_vec() - q.lambda_vec()).norm() == 0.0);
}

TEST_CASE("one exact natural-gradient step with rho = 1 lands on the optimum") {
  vbsl::RngStream rng(21);
  const auto model = NormalLocationModel::zeros(4);
  const auto target = posterior_params(model);
  for (int rep = 0; rep < 5; ++rep) {
    const double mu0 = 2.0 * rng.normal();
    const double v0 = 0.3 + 2.0 * rng.uniform();
    const auto q = NaturalGaussianParams::from_moments(VectorXd::Constant(1, mu0),
                                                       MatrixXd::Constant(1, 1, v0));
    // Exact lower-bound gradient for an exponential-family target:
    // I_F(lambda) (lambda* - lambda).
    const VectorXd hhat = fisher_1d(mu0, v0) * (target.lambda_vec() - q.lambda_vec());
    const auto out = apply_step(q, q.natural_gradient(hhat), 1.0);
    REQUIRE_FALSE(out.rejected);
    CHECK((out.params.lambda_vec() - target.lambda_vec()).norm() < 1e-8);
  }
}

TEST_CASE("cholesky step floors the diagonal instead of rejecting") {
  CholeskyGaussianParams q(VectorXd::Zero(1), MatrixXd::Constant(1, 1, 0.5));
  VectorXd dir(2);
  dir << 0.0, -0.5;  // C 0.5 -> 0, would be singular
  const auto out = apply_step(q, dir, 1.0);
  CHECK_FALSE(out.rejected);
  CHECK(out.params.c_lower()(0, 0) == doctest::Approx(1e-8));
}

TEST_CASE("adaptive rate converges to 1 for a noise-free gradient") {
  AdaptiveRateState st;
  st.nbar = VectorXd::Zero(2);
  st.cbar = 1.0;
  st.alpha = 0.2;
  const VectorXd v = VectorXd::Constant(2, 0.5);  // |v|^2 = 0.5 < dim, cap stays loose
  for (int t = 0; t < 200; ++t) {
    st = adaptive_rate_update(st, v, 2);
    CHECK(st.rho > 0.0);
    CHECK(st.rho <= std::sqrt(2.0 / st.cbar) + 1e-15);
    CHECK(st.alpha > 0.0);
    CHECK(st.alpha <= 1.0);
  }
  CHECK(st.rho == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("adaptive rate decays toward zero under pure noise") {
  vbsl::RngStream rng(23);
  AdaptiveRateState st;
  const int dim = 4;
  st.nbar = rng.normal_vector(dim);
  st.cbar = st.nbar.squaredNorm() + dim;
  st.alpha = 0.2;
  double tail = 0.0;
  const int iters = 2000;
  for (int t = 0; t < iters; ++t) {
    st = adaptive_rate_update(st, rng.normal_vector(dim), dim);
    if (t >= iters - 100) tail += st.rho;
  }
  CHECK(tail / 100.0 < 0.05);
}

TEST_CASE("adaptive rate cap binds") {
  AdaptiveRateState st;
  st.nbar = VectorXd::Constant(1, 10.0);
  st.cbar = 100.0;
  st.alpha = 0.5;
  st = adaptive_rate_update(st, VectorXd::Constant(1, 10.0), 1);
  // Uncapped ratio is 1; the cap sqrt(1/100) = 0.1 wins.
  CHECK(st.rho == doctest::Approx(std::sqrt(1.0 / st.cbar)).epsilon(1e-12));
}

TEST_CASE("adadelta: zero gradient means zero step, accumulators decay") {
  AdadeltaState st;
  VectorXd g = VectorXd::Constant(3, 2.0);
  (void)adadelta_step(st, g);  // prime the accumulators
  const VectorXd acc0 = st.acc_grad_sq;
  for (int t = 0; t < 100; ++t) {
    const VectorXd step = adadelta_step(st, VectorXd::Zero(3));
    CHECK(step.norm() == 0.0);
  }
  CHECK(st.acc_grad_sq[0] == doctest::Approx(std::pow(0.95, 100) * acc0[0]).epsilon(1e-9));
}

TEST_CASE("adadelta ascends a quadratic") {
  AdadeltaState st;
  double x = 0.0;
  const auto f = [](double v) { return -(v - 2.0) * (v - 2.0); };
  const double f0 = f(x);
  for (int t = 0; t < 300; ++t) {
    const VectorXd grad = VectorXd::Constant(1, -2.0 * (x - 2.0));
    x += adadelta_step(st, grad)[0];
  }
  CHECK(f(x) > f0);
  CHECK(std::abs(x - 2.0) < 1.9);
}

TEST_CASE("run: zero iterations leaves only the initialization record") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::exact;
  cfg.iterations = 0;
  cfg.sample_count = 50;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  const auto trace = run_vb(cfg, model);
  CHECK(trace.records.size() == 1);
  CHECK(trace.records[0].iteration == 0);
  CHECK_FALSE(trace.aborted);
}

TEST_CASE("run: exact conjugate toy converges to the exact posterior") {
  vbsl::RngStream rng(31);
  const NormalLocationModel model(rng.normal_vector(4));
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::exact;
  cfg.parametrization = ParametrizationKind::natural;
  cfg.step_rule = StepRuleKind::fixed;
  cfg.fixed_rate_offset = 5.0;
  cfg.sample_count = 200;
  cfg.iterations = 300;
  cfg.seed = 10;
  cfg.init_mean = VectorXd::Constant(1, -1.0);
  cfg.init_cov = MatrixXd::Constant(1, 1, 2.0);
  const auto trace = run_vb(cfg, model);
  const auto post = model.exact_posterior();
  CHECK(std::abs(trace.final_mean[0] - post.mean) < 0.05);
  CHECK(std::abs(trace.final_cov(0, 0) - post.var) / post.var < 0.10);

  std::vector<double> lb;
  for (std::size_t i = trace.records.size() - 10; i < trace.records.size(); ++i)
    lb.push_back(trace.records[i].lb);
  const auto m = testutil::mc_mean(lb);
  CHECK(std::abs(m.mean - model.log_marginal()) < 0.01 * model.n());
}

TEST_CASE("run: cholesky parametrization reaches the same optimum") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::exact;
  cfg.parametrization = ParametrizationKind::cholesky;
  cfg.step_rule = StepRuleKind::fixed;
  cfg.sample_count = 200;
  cfg.iterations = 300;
  cfg.seed = 11;
  cfg.init_mean = VectorXd::Constant(1, -1.0);
  cfg.init_cov = MatrixXd::Constant(1, 1, 2.0);
  const auto trace = run_vb(cfg, model);
  const auto post = model.exact_posterior();
  CHECK(std::abs(trace.final_mean[0] - post.mean) < 0.05);
  CHECK(std::abs(trace.final_cov(0, 0) - post.var) / post.var < 0.10);
}

TEST_CASE("run: budget accounting is exact") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::vbsl;
  cfg.n_policy.n_fixed = 20;
  cfg.sample_count = 30;
  cfg.iterations = 10;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  const auto trace = run_vb(cfg, model);
  long total = 0;
  for (const auto& r : trace.records) total += r.sims;
  CHECK(total == trace.total_sims);
  // Fixed policy: every estimate costs exactly N particles.
  CHECK(trace.total_sims == 20L * 30L * 11L);  // init batch + 10 iterations
  CHECK(trace.records.back().cum_sims == trace.total_sims);
}

TEST_CASE("run: natural-parameter records always imply a PD covariance") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::vbsl;
  cfg.n_policy.n_fixed = 50;
  cfg.sample_count = 50;
  cfg.iterations = 40;
  cfg.seed = 3;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  const auto trace = run_vb(cfg, model);
  for (const auto& r : trace.records) {
    const auto q = NaturalGaussianParams::from_lambda(r.lambda.head(1), r.lambda.tail(1));
    CHECK(q.has_value());
  }
}

TEST_CASE("run: identical results for any worker thread count") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::vbsl;
  cfg.n_policy.n_fixed = 30;
  cfg.sample_count = 40;
  cfg.iterations = 15;
  cfg.seed = 77;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  cfg.threads = 1;
  const auto a = run_vb(cfg, model);
  cfg.threads = 2;
  const auto b = run_vb(cfg, model);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK((a.records[i].lambda - b.records[i].lambda).norm() == 0.0);
    CHECK(a.records[i].lb == b.records[i].lb);
  }
}

TEST_CASE("run: vbsl optimum is insensitive to the particle count (smoke)") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::vbsl;
  cfg.sample_count = 100;
  cfg.iterations = 100;
  cfg.seed = 5;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  cfg.n_policy.n_fixed = 50;
  const auto a = run_vb(cfg, model);
  cfg.n_policy.n_fixed = 100;
  const auto b = run_vb(cfg, model);
  CHECK(std::abs(a.final_mean[0] - b.final_mean[0]) < 0.1);
}

TEST_CASE("run: persistent estimator failure aborts with a diagnostic") {
  FailingModel model;
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::vbsl;
  cfg.sample_count = 10;
  cfg.iterations = 30;
  cfg.max_nonfinite_iters = 5;
  cfg.init_mean = VectorXd::Zero(2);
  cfg.init_cov = MatrixXd::Identity(2, 2);
  const auto trace = run_vb(cfg, model);
  CHECK(trace.aborted);
  CHECK(trace.abort_reason.find("non-finite") != std::string::npos);
}

TEST_CASE("run: lb plateau stopping rule ends early") {
  const auto model = NormalLocationModel::zeros(4);
  OptimizerConfig cfg;
  cfg.estimator = EstimatorKind::exact;
  cfg.sample_count = 400;
  cfg.iterations = 500;
  cfg.seed = 6;
  cfg.init_mean = VectorXd::Zero(1);
  cfg.init_cov = MatrixXd::Identity(1, 1);
  cfg.stopping.plateau = true;
  cfg.stopping.window = 10;
  cfg.stopping.tolerance = 0.05;
  cfg.stopping.consecutive = 3;
  const auto trace = run_vb(cfg, model);
  CHECK(static_cast<int>(trace.records.size()) - 1 < 500);
}
