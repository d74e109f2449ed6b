#pragma once

#include <optional>

#include <Eigen/Dense>

#include "vbsl/rng.hpp"

namespace vbsl {

// T(theta) = [theta; vech(theta theta^T)].
struct SufficientStat {
  Eigen::VectorXd t1;
  Eigen::VectorXd t2;
};

SufficientStat sufficient_stat(const Eigen::VectorXd& theta);

// Multivariate normal in natural (exponential-family) parameters:
//   lambda1 = Sigma^{-1} mu,  lambda2 = -1/2 D_p^T vec(Sigma^{-1}).
// The implied covariance must be positive definite; `from_lambda` reports a
// non-PD proposal by returning nullopt so callers can reject the update.
class NaturalGaussianParams {
 public:
  static NaturalGaussianParams from_moments(const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& sigma);
  static std::optional<NaturalGaussianParams> from_lambda(const Eigen::VectorXd& lambda1,
                                                          const Eigen::VectorXd& lambda2);

  const Eigen::VectorXd& lambda1() const { return lambda1_; }
  const Eigen::VectorXd& lambda2() const { return lambda2_; }
  Eigen::VectorXd lambda_vec() const;

  const Eigen::VectorXd& mean() const { return mu_; }
  const Eigen::MatrixXd& covariance() const { return sigma_; }
  const Eigen::MatrixXd& precision() const { return prec_; }

  int dim() const { return static_cast<int>(mu_.size()); }
  int lambda_dim() const { return static_cast<int>(lambda1_.size() + lambda2_.size()); }

  double log_density(const Eigen::VectorXd& theta) const;

  // grad_lambda log q = T(theta) - E T = [theta - mu; vech(theta theta^T - Sigma - mu mu^T)].
  Eigen::VectorXd score(const Eigen::VectorXd& theta) const;

  // Closed-form inverse Fisher information:
  //   [[Sigma^{-1} + M^T S^{-1} M, -M^T S^{-1}], [-S^{-1} M, S^{-1}]]
  // with M = 2 D_p^+ (mu x I) and S = 2 D_p^+ (Sigma x Sigma) D_p^{+T}.
  Eigen::MatrixXd fisher_inverse() const;

  // I_F(lambda)^{-1} h without forming the full matrix.
  Eigen::VectorXd natural_gradient(const Eigen::VectorXd& hhat) const;

  Eigen::VectorXd sample(RngStream& rng) const;
  Eigen::MatrixXd sample_many(int count, RngStream& rng) const;  // p x count

 private:
  NaturalGaussianParams() = default;
  void finalize();  // fills lambda from moments or vice versa bookkeeping

  Eigen::VectorXd lambda1_, lambda2_;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_, prec_, chol_sigma_;
  double log_det_sigma_ = 0.0;
};

// Multivariate normal parametrized by the mean and the lower-triangular
// Cholesky factor C of the precision matrix, Sigma^{-1} = C C^T.  Diagonal
// entries of C may take either sign but must be nonzero.
class CholeskyGaussianParams {
 public:
  CholeskyGaussianParams(Eigen::VectorXd mu, Eigen::MatrixXd c_lower);
  static CholeskyGaussianParams from_moments(const Eigen::VectorXd& mu,
                                             const Eigen::MatrixXd& sigma);
  static CholeskyGaussianParams from_lambda(const Eigen::VectorXd& lambda);

  const Eigen::VectorXd& mean() const { return mu_; }
  const Eigen::MatrixXd& c_lower() const { return c_; }
  Eigen::MatrixXd covariance() const;
  const Eigen::MatrixXd& precision() const { return prec_; }

  Eigen::VectorXd lambda_vec() const;  // [mu; vech(C)]
  int dim() const { return static_cast<int>(mu_.size()); }
  int lambda_dim() const;

  double log_density(const Eigen::VectorXd& theta) const;

  // grad_lambda log q = [C C^T (theta - mu); vech(diag(1/C) - (theta - mu)(theta - mu)^T C)].
  Eigen::VectorXd score(const Eigen::VectorXd& theta) const;

  // Block-diagonal Fisher information [[C C^T, 0], [0, I22]] with
  // I22 = 2 L (C^T x I) D D^+ (Sigma x Sigma) D^{+T} D^T (C x I) L^T.
  Eigen::MatrixXd fisher() const;
  Eigen::MatrixXd fisher_i22() const;

  Eigen::VectorXd natural_gradient(const Eigen::VectorXd& hhat) const;

  Eigen::VectorXd sample(RngStream& rng) const;
  Eigen::MatrixXd sample_many(int count, RngStream& rng) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd c_, prec_;
};

}  // namespace vbsl
