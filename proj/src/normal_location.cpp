#include "vbsl/models/normal_location.hpp"

#include <cmath>
#include <stdexcept>

#include "vbsl/stats.hpp"

namespace vbsl {

using Eigen::VectorXd;

NormalLocationModel::NormalLocationModel(VectorXd y) : y_(std::move(y)) {
  if (y_.size() < 1) throw std::invalid_argument("normal_location: n >= 1 required");
  transforms_.resize(1);  // identity
}

NormalLocationModel NormalLocationModel::zeros(int n) {
  return NormalLocationModel(VectorXd::Zero(n));
}

SummaryBatch NormalLocationModel::simulate_summaries(const VectorXd& theta, int count,
                                                     RngStream& rng) const {
  const int d = summary_dim();
  SummaryBatch batch;
  batch.samples.resize(d, count);
  for (int c = 0; c < count; ++c)
    for (int i = 0; i < d; ++i) batch.samples(i, c) = theta[0] + rng.normal();
  return batch;
}

double NormalLocationModel::log_prior(const VectorXd& theta) const {
  return norm_logpdf(theta[0], 0.0, 1.0);
}

std::optional<double> NormalLocationModel::exact_log_like(const VectorXd& theta) const {
  const int d = summary_dim();
  return -0.5 * d * kLog2Pi - 0.5 * (y_.array() - theta[0]).square().sum();
}

NormalLocationModel::Gaussian1D NormalLocationModel::exact_posterior() const {
  const double n = summary_dim();
  return {n / (1.0 + n) * ybar(), 1.0 / (1.0 + n)};
}

NormalLocationModel::Gaussian1D NormalLocationModel::abc_posterior(double epsilon) const {
  const double n = summary_dim();
  const double ne = n / (1.0 + epsilon);
  return {ne / (1.0 + ne) * ybar(), 1.0 / (1.0 + ne)};
}

double NormalLocationModel::lb_vbsl() const {
  const double n = summary_dim();
  const double sum = y_.sum();
  return -0.5 * kLog2Pi - y_.squaredNorm() / (2.0 * n) - std::log(n + 1.0) / (2.0 * n) +
         sum * sum / (2.0 * n * (n + 1.0));
}

double NormalLocationModel::lb_vbil(double epsilon, double tau2) const {
  const double n = summary_dim();
  const double ne = n / (1.0 + epsilon);
  return -0.5 * kLog2Pi - 0.5 * std::log(1.0 + epsilon) -
         y_.squaredNorm() / (2.0 * n * (1.0 + epsilon)) - std::log(ne + 1.0) / (2.0 * n) +
         ne * ne / (2.0 * n * (1.0 + ne)) * ybar() * ybar() - tau2 / (2.0 * n);
}

double NormalLocationModel::abc_epsilon_for_variance_ratio(int n, double ratio) {
  const double v = ratio / (1.0 + n);
  if (!(v > 0.0 && v < 1.0))
    throw std::invalid_argument("abc_epsilon_for_variance_ratio: infeasible ratio");
  return n * v / (1.0 - v) - 1.0;
}

double NormalLocationModel::log_marginal() const {
  return summary_dim() * lb_vbsl();
}

}  // namespace vbsl
