#pragma once

#include "vbsl/model.hpp"

namespace vbsl {

// Location model: n observations N(theta, 1), standard normal prior on
// theta, and the full data vector used as the summary statistic (d = n).
// Everything of interest is available in closed form, which makes this the
// reference model for cross-checking the estimators and the optimizer.
class NormalLocationModel : public SimulatorModel {
 public:
  explicit NormalLocationModel(Eigen::VectorXd y);
  static NormalLocationModel zeros(int n);

  std::string id() const override { return "normal_location"; }
  int param_dim() const override { return 1; }
  int summary_dim() const override { return static_cast<int>(y_.size()); }
  const Eigen::VectorXd& observed_summary() const override { return y_; }

  SummaryBatch simulate_summaries(const Eigen::VectorXd& theta, int count,
                                  RngStream& rng) const override;
  double log_prior(const Eigen::VectorXd& theta) const override;
  const std::vector<ScalarTransform>& transforms() const override { return transforms_; }
  std::optional<double> exact_log_like(const Eigen::VectorXd& theta) const override;

  struct Gaussian1D {
    double mean;
    double var;
  };

  int n() const { return static_cast<int>(y_.size()); }
  double ybar() const { return y_.mean(); }

  Gaussian1D exact_posterior() const;
  Gaussian1D abc_posterior(double epsilon) const;

  // Attainable lower bounds, scaled by 1/n.
  double lb_vbsl() const;
  double lb_vbil(double epsilon, double tau2) const;

  // epsilon making the kernel-smoothed posterior variance equal
  // ratio * (true posterior variance).
  static double abc_epsilon_for_variance_ratio(int n, double ratio);

  // log p(y) with the summary treated as exactly Gaussian.
  double log_marginal() const;

 private:
  Eigen::VectorXd y_;
  std::vector<ScalarTransform> transforms_;
};

}  // namespace vbsl
