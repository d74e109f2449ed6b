#include "vbsl/likelihood_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vbsl/stats.hpp"

namespace vbsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Cholesky with the one-shot jitter fallback for degenerate sample
// covariances (constant summaries early in an optimization).
Eigen::LLT<MatrixXd> covariance_llt(const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt;
  const int d = static_cast<int>(cov.rows());
  const double jitter = 1e-10 * cov.trace() / d;
  MatrixXd bumped = cov + jitter * MatrixXd::Identity(d, d);
  llt.compute(bumped);
  if (llt.info() != Eigen::Success)
    throw SingularCovarianceError("sample covariance is singular even after jitter");
  return llt;
}

double log_det_from_llt(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

// log c(k, nu) for the Wishart normalizing constant
// c(k, nu) = 2^{-k nu/2} pi^{-k(k-1)/4} / prod_i Gamma((nu - i + 1)/2);
// the 2^{-k nu/2} base (not (2 pi)^{-k nu/2}) is what makes the density
// estimate unbiased, which the Monte Carlo suite pins down.
double log_c(int k, double nu) {
  double v = -0.5 * k * nu * std::log(2.0) - 0.25 * k * (k - 1) * std::log(M_PI);
  for (int i = 1; i <= k; ++i) v -= std::lgamma(0.5 * (nu - i + 1.0));
  return v;
}

double core_unbiased_log_sl(const VectorXd& s, const EmpiricalMoments& m) {
  const int d = static_cast<int>(s.size());
  const double n = static_cast<double>(m.n);
  const auto llt = covariance_llt(m.cov);
  const VectorXd resid = s - m.mean;
  const double quad = resid.dot(llt.solve(resid));
  double digamma_sum = 0.0;
  for (int i = 1; i <= d; ++i) digamma_sum += digamma(0.5 * (n - i));
  return -0.5 * d * kLog2Pi -
         0.5 * (log_det_from_llt(llt) + d * std::log(0.5 * (n - 1.0)) - digamma_sum) -
         0.5 * ((n - d - 2.0) / (n - 1.0) * quad - d / n);
}

}  // namespace

void SummaryBatch::append(const SummaryBatch& more) {
  if (samples.size() == 0) {
    samples = more.samples;
    return;
  }
  const long old_n = samples.cols();
  samples.conservativeResize(Eigen::NoChange, old_n + more.samples.cols());
  samples.rightCols(more.samples.cols()) = more.samples;
}

EmpiricalMoments empirical_moments(const SummaryBatch& batch) {
  const long n = batch.n();
  if (n < 2) throw std::invalid_argument("empirical_moments: at least two samples required");
  EmpiricalMoments m;
  m.n = n;
  m.mean = batch.samples.rowwise().mean();
  const MatrixXd centered = batch.samples.colwise() - m.mean;
  m.cov = centered * centered.transpose() / static_cast<double>(n - 1);
  m.cov = 0.5 * (m.cov + m.cov.transpose()).eval();
  return m;
}

double plugin_sl_logdensity(const VectorXd& s, const EmpiricalMoments& m) {
  const int d = static_cast<int>(s.size());
  const auto llt = covariance_llt(m.cov);
  const VectorXd resid = s - m.mean;
  return -0.5 * d * kLog2Pi - 0.5 * log_det_from_llt(llt) - 0.5 * resid.dot(llt.solve(resid));
}

double unbiased_sl_density_log(const VectorXd& s, const SummaryBatch& batch) {
  const int d = batch.dim();
  const long n = batch.n();
  if (n <= d + 3) throw std::invalid_argument("unbiased_sl_density_log: N > d + 3 required");
  const auto m = empirical_moments(batch);
  const double nn = static_cast<double>(n);
  const MatrixXd s_theta = (nn - 1.0) * m.cov;

  Eigen::LLT<MatrixXd> llt_s(s_theta);
  if (llt_s.info() != Eigen::Success) return kNegInf;  // degenerate scatter

  const VectorXd resid = s - m.mean;
  const MatrixXd arg = s_theta - resid * resid.transpose() / (1.0 - 1.0 / nn);
  Eigen::LLT<MatrixXd> llt_arg(arg);
  if (llt_arg.info() != Eigen::Success) return kNegInf;  // psi(A) = 0 branch

  return -0.5 * d * kLog2Pi + log_c(d, nn - 2.0) - log_c(d, nn - 1.0) -
         0.5 * d * std::log1p(-1.0 / nn) - 0.5 * (nn - d - 2.0) * log_det_from_llt(llt_s) +
         0.5 * (nn - d - 3.0) * log_det_from_llt(llt_arg);
}

LogLikEstimate unbiased_log_sl(const VectorXd& s, const SummaryBatch& batch) {
  const int d = batch.dim();
  const long n = batch.n();
  if (n <= d + 2) throw std::invalid_argument("unbiased_log_sl: N > d + 2 required");

  LogLikEstimate out;
  out.particles = n;
  out.value = core_unbiased_log_sl(s, empirical_moments(batch));

  // Group-wise variance estimate: each group must itself satisfy N_g > d + 2.
  int groups = 10;
  while (groups > 1 && n / groups <= d + 2) --groups;
  if (groups >= 2) {
    std::vector<double> estimates;
    estimates.reserve(groups);
    const long base = n / groups;
    long start = 0;
    bool ok = true;
    for (int g = 0; g < groups; ++g) {
      const long len = (g == groups - 1) ? n - start : base;
      SummaryBatch sub{batch.samples.middleCols(start, len)};
      start += len;
      try {
        estimates.push_back(core_unbiased_log_sl(s, empirical_moments(sub)));
      } catch (const SingularCovarianceError&) {
        ok = false;
        break;
      }
    }
    if (ok) {
      double mean = 0.0;
      for (double e : estimates) mean += e;
      mean /= groups;
      double var = 0.0;
      for (double e : estimates) var += (e - mean) * (e - mean);
      var /= (groups - 1);
      out.var_estimate = var / groups;
    }
  }
  return out;
}

LogLikEstimate abc_loglik(const VectorXd& s, const SummaryBatch& batch, double epsilon) {
  const int d = batch.dim();
  const long n = batch.n();
  if (n < 1) throw std::invalid_argument("abc_loglik: at least one sample required");
  if (!(epsilon > 0.0)) throw std::invalid_argument("abc_loglik: epsilon > 0 required");

  const double log_norm = -0.5 * d * std::log(2.0 * M_PI * epsilon);
  VectorXd log_w(n);
  for (long i = 0; i < n; ++i)
    log_w[i] = log_norm - 0.5 * (s - batch.samples.col(i)).squaredNorm() / epsilon;

  LogLikEstimate out;
  out.particles = n;
  const double max_lw = log_w.maxCoeff();
  if (!std::isfinite(max_lw)) {
    out.value = kNegInf;  // every kernel weight underflowed
    return out;
  }
  const VectorXd a = (log_w.array() - max_lw).exp();
  const double a_mean = a.mean();
  out.value = max_lw + std::log(a_mean);
  if (n >= 2) {
    const double a_var = (a.array() - a_mean).square().sum() / static_cast<double>(n - 1);
    out.var_estimate = a_var / (a_mean * a_mean) / static_cast<double>(n);
  }
  return out;
}

AdaptiveResult adaptive_particles(const SimulateFn& simulate, const BatchEstimateFn& estimate,
                                  const AdaptiveParticleConfig& cfg, RngStream& rng) {
  if (cfg.n_min < 1) throw std::invalid_argument("adaptive_particles: n_min >= 1 required");
  if (!(cfg.target_var > 0.0))
    throw std::invalid_argument("adaptive_particles: target_var > 0 required");
  const long cap = cfg.hard_cap > 0 ? cfg.hard_cap : 100L * cfg.n_min;

  AdaptiveResult res;
  res.batch = simulate(cfg.n_min, rng);
  res.estimate = estimate(res.batch);
  const bool target_finite = std::isfinite(cfg.target_var);
  auto above_target = [&]() {
    if (!target_finite) return false;
    return !res.estimate.var_estimate || *res.estimate.var_estimate > cfg.target_var;
  };
  while (above_target() && res.batch.n() < cap) {
    const int add = static_cast<int>(std::min<long>(cfg.increment, cap - res.batch.n()));
    res.batch.append(simulate(add, rng));
    res.estimate = estimate(res.batch);
  }
  res.estimate.particles = res.batch.n();
  res.estimate.capped = above_target() && res.batch.n() >= cap;
  return res;
}

}  // namespace vbsl
