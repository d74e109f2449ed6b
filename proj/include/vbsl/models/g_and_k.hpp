#pragma once

#include <vector>

#include "vbsl/model.hpp"

namespace vbsl::gk {

struct GkMargin {
  double a = 0.0;  // location
  double b = 1.0;  // scale, > 0
  double g = 0.0;  // skewness
  double k = 0.0;  // kurtosis, > -0.5
};

// Margin parameters plus spherical correlation angles (q = 2: one angle,
// q = 3: three).  The shape constant c is fixed at 0.8.
struct GkParams {
  std::vector<GkMargin> margins;
  Eigen::VectorXd w;
  int q() const { return static_cast<int>(margins.size()); }
};

inline constexpr double kShapeC = 0.8;

// Quantile function Q(p) = A + B [1 + c (1-e^{-g z})/(1+e^{-g z})] (1+z^2)^k z
// with z = Phi^{-1}(p).
double quantile(double p, const GkMargin& m, double c = kShapeC);

// Q applied directly to a standard normal deviate z (skips the Phi/Phi^{-1}
// round trip used when simulating through a Gaussian copula).
double transform_normal(double z, const GkMargin& m, double c = kShapeC);

// Lower Cholesky factor of the copula correlation matrix from unconstrained
// angles, gamma_j = pi / (1 + exp(-w_j)).
Eigen::MatrixXd correlation_cholesky(const Eigen::VectorXd& w, int q);

// n x q draws: Z ~ N(0, LL^T) pushed through the margins.
Eigen::MatrixXd simulate(const GkParams& params, int n, RngStream& rng);

// Octile summaries per margin (location, spread, octile skewness, tail
// spread ratio) plus the normal-scores correlation for each lower-triangle
// pair; d = 4q + q(q-1)/2.  Throws if a margin's octile spread vanishes.
Eigen::VectorXd summaries(const Eigen::MatrixXd& data);

double normal_scores_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Working-scale maps: A in (-0.1, 0.1), B in (0, 0.05), g in (-1, 1),
// k in (-0.2, 0.5); angles pass through.
Eigen::VectorXd to_tilde(const GkParams& params);
GkParams from_tilde(const Eigen::VectorXd& tilde, int q);

}  // namespace vbsl::gk

namespace vbsl {

// Multivariate g-and-k with Gaussian copula; parameters on the working
// scale are the transformed margins followed by the correlation angles.
class GAndKModel : public SimulatorModel {
 public:
  GAndKModel(Eigen::MatrixXd observed_data, int q);

  std::string id() const override { return "g_and_k"; }
  int param_dim() const override { return 4 * q_ + q_ * (q_ - 1) / 2; }
  int summary_dim() const override { return param_dim(); }
  const Eigen::VectorXd& observed_summary() const override { return observed_summary_; }

  SummaryBatch simulate_summaries(const Eigen::VectorXd& theta, int count,
                                  RngStream& rng) const override;
  double log_prior(const Eigen::VectorXd& theta) const override;
  const std::vector<ScalarTransform>& transforms() const override { return transforms_; }

  int q() const { return q_; }
  long data_size() const { return data_.rows(); }

 private:
  Eigen::MatrixXd data_;  // n x q
  int q_;
  Eigen::VectorXd observed_summary_;
  std::vector<ScalarTransform> transforms_;
};

}  // namespace vbsl
