#pragma once

#include <vector>

#include "vbsl/model.hpp"

namespace vbsl::stable {

// Draw from the stable law with characteristic function
//   exp{ i delta t - gamma^alpha |t|^alpha (1 + i beta tan(pi alpha/2) sgn(t)
//        (|gamma t|^{1-alpha} - 1)) },   alpha != 1,
// (continuous-in-alpha parametrization; the alpha = 1 branch uses the
// 2/pi log|gamma t| form).  Chambers-Mallows-Stuck construction.
double sample(double alpha, double beta, double gamma, double delta, RngStream& rng);

// Quantile-based point estimate of (alpha, beta, gamma, delta) from the
// 5%/25%/50%/75%/95% sample quantiles and the published lookup tables.
// Values outside the table range are clamped and flagged.
struct QuantileEstimate {
  double alpha = 2.0;
  double beta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;
  bool clamped = false;
};

QuantileEstimate quantile_estimate(std::vector<double> data);

// Unconstrained working scale: alpha in (1.1, 2), beta in (-1, 1), gamma > 0
// via logit/log maps; delta passes through.
Eigen::Vector4d to_tilde(const Eigen::Vector4d& natural);
Eigen::Vector4d from_tilde(const Eigen::Vector4d& tilde);

}  // namespace vbsl::stable

namespace vbsl {

// Univariate stable model: the summary statistic is the quantile-based
// point estimate of the parameters mapped to the working scale (d = p = 4),
// with a standard normal prior on the working-scale parameters.
class AlphaStableModel : public SimulatorModel {
 public:
  explicit AlphaStableModel(std::vector<double> data);

  std::string id() const override { return "alpha_stable"; }
  int param_dim() const override { return 4; }
  int summary_dim() const override { return 4; }
  const Eigen::VectorXd& observed_summary() const override { return observed_summary_; }

  SummaryBatch simulate_summaries(const Eigen::VectorXd& theta, int count,
                                  RngStream& rng) const override;
  double log_prior(const Eigen::VectorXd& theta) const override;
  const std::vector<ScalarTransform>& transforms() const override { return transforms_; }

  long data_size() const { return static_cast<long>(data_.size()); }

  // Clamps the estimate into the constrained box before the logit transform.
  static Eigen::Vector4d summary_statistic(std::vector<double> data);

 private:
  std::vector<double> data_;
  Eigen::VectorXd observed_summary_;
  std::vector<ScalarTransform> transforms_;
};

}  // namespace vbsl
