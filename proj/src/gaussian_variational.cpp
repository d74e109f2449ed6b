#include "vbsl/gaussian_variational.hpp"

#include <cmath>
#include <stdexcept>

#include "vbsl/matrix_calculus.hpp"
#include "vbsl/stats.hpp"

namespace vbsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace mc = matcalc;

SufficientStat sufficient_stat(const VectorXd& theta) {
  return {theta, mc::vech_lower(theta * theta.transpose())};
}

NaturalGaussianParams NaturalGaussianParams::from_moments(const VectorXd& mu,
                                                          const MatrixXd& sigma) {
  if (mu.size() != sigma.rows() || sigma.rows() != sigma.cols())
    throw std::invalid_argument("NaturalGaussianParams: dimension mismatch");
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("NaturalGaussianParams: covariance is not positive definite");
  const int p = static_cast<int>(mu.size());
  NaturalGaussianParams out;
  out.mu_ = mu;
  out.sigma_ = sigma;
  out.prec_ = llt.solve(MatrixXd::Identity(p, p));
  out.prec_ = 0.5 * (out.prec_ + out.prec_.transpose()).eval();
  out.chol_sigma_ = llt.matrixL();
  out.log_det_sigma_ = 2.0 * out.chol_sigma_.diagonal().array().log().sum();
  out.lambda1_ = out.prec_ * mu;
  out.lambda2_ = -0.5 * (mc::duplication_matrix(p).transpose() * mc::vec(out.prec_));
  return out;
}

std::optional<NaturalGaussianParams> NaturalGaussianParams::from_lambda(
    const VectorXd& lambda1, const VectorXd& lambda2) {
  const int p = static_cast<int>(lambda1.size());
  if (lambda2.size() != p * (p + 1) / 2)
    throw std::invalid_argument("NaturalGaussianParams: lambda2 has wrong length");
  // vec^{-1}(D^{+T} lambda2) = -1/2 Sigma^{-1}
  MatrixXd prec = -2.0 * mc::vec_inverse(mc::dup_mp_inverse(p).transpose() * lambda2);
  prec = 0.5 * (prec + prec.transpose()).eval();
  Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) return std::nullopt;

  NaturalGaussianParams out;
  out.lambda1_ = lambda1;
  out.lambda2_ = lambda2;
  out.prec_ = prec;
  out.sigma_ = llt.solve(MatrixXd::Identity(p, p));
  out.sigma_ = 0.5 * (out.sigma_ + out.sigma_.transpose()).eval();
  Eigen::LLT<MatrixXd> llt_sigma(out.sigma_);
  if (llt_sigma.info() != Eigen::Success) return std::nullopt;
  out.mu_ = out.sigma_ * lambda1;
  out.chol_sigma_ = llt_sigma.matrixL();
  out.log_det_sigma_ = 2.0 * out.chol_sigma_.diagonal().array().log().sum();
  return out;
}

VectorXd NaturalGaussianParams::lambda_vec() const {
  VectorXd l(lambda_dim());
  l << lambda1_, lambda2_;
  return l;
}

double NaturalGaussianParams::log_density(const VectorXd& theta) const {
  const VectorXd z = theta - mu_;
  return -0.5 * dim() * kLog2Pi - 0.5 * log_det_sigma_ - 0.5 * z.dot(prec_ * z);
}

VectorXd NaturalGaussianParams::score(const VectorXd& theta) const {
  VectorXd s(lambda_dim());
  s.head(dim()) = theta - mu_;
  s.tail(lambda2_.size()) =
      mc::vech_lower(theta * theta.transpose() - sigma_ - mu_ * mu_.transpose());
  return s;
}

namespace {

struct NaturalFisherParts {
  MatrixXd m;                     // 2 D^+ (mu x I)
  Eigen::LDLT<MatrixXd> s_ldlt;   // factor of S = 2 D^+ (Sigma x Sigma) D^{+T}
};

NaturalFisherParts natural_fisher_parts(const VectorXd& mu, const MatrixXd& sigma) {
  const int p = static_cast<int>(mu.size());
  const MatrixXd& dplus = mc::dup_mp_inverse(p);
  NaturalFisherParts parts;
  parts.m = 2.0 * dplus * mc::kron(mu, MatrixXd::Identity(p, p));
  MatrixXd s = 2.0 * dplus * mc::kron(sigma, sigma) * dplus.transpose();
  parts.s_ldlt.compute(s);
  if (parts.s_ldlt.info() != Eigen::Success || !parts.s_ldlt.isPositive())
    throw std::runtime_error("fisher_inverse: S block is singular (degenerate covariance)");
  return parts;
}

}  // namespace

MatrixXd NaturalGaussianParams::fisher_inverse() const {
  const int p = dim();
  const int m2 = static_cast<int>(lambda2_.size());
  const auto parts = natural_fisher_parts(mu_, sigma_);
  const MatrixXd s_inv = parts.s_ldlt.solve(MatrixXd::Identity(m2, m2));
  const MatrixXd s_inv_m = s_inv * parts.m;

  MatrixXd out(p + m2, p + m2);
  out.topLeftCorner(p, p) = prec_ + parts.m.transpose() * s_inv_m;
  out.topRightCorner(p, m2) = -s_inv_m.transpose();
  out.bottomLeftCorner(m2, p) = -s_inv_m;
  out.bottomRightCorner(m2, m2) = s_inv;
  return 0.5 * (out + out.transpose()).eval();
}

VectorXd NaturalGaussianParams::natural_gradient(const VectorXd& hhat) const {
  const int p = dim();
  if (hhat.size() != lambda_dim())
    throw std::invalid_argument("natural_gradient: gradient has wrong length");
  const VectorXd h1 = hhat.head(p);
  const VectorXd h2 = hhat.tail(lambda2_.size());
  const auto parts = natural_fisher_parts(mu_, sigma_);
  const VectorXd w = parts.s_ldlt.solve(parts.m * h1 - h2);
  VectorXd out(lambda_dim());
  out.head(p) = prec_ * h1 + parts.m.transpose() * w;
  out.tail(h2.size()) = -w;
  return out;
}

VectorXd NaturalGaussianParams::sample(RngStream& rng) const {
  return mu_ + chol_sigma_ * rng.normal_vector(dim());
}

MatrixXd NaturalGaussianParams::sample_many(int count, RngStream& rng) const {
  MatrixXd out(dim(), count);
  for (int i = 0; i < count; ++i) out.col(i) = sample(rng);
  return out;
}

CholeskyGaussianParams::CholeskyGaussianParams(VectorXd mu, MatrixXd c_lower)
    : mu_(std::move(mu)), c_(std::move(c_lower)) {
  if (c_.rows() != c_.cols() || c_.rows() != mu_.size())
    throw std::invalid_argument("CholeskyGaussianParams: dimension mismatch");
  c_ = c_.triangularView<Eigen::Lower>();
  for (int i = 0; i < c_.rows(); ++i)
    if (c_(i, i) == 0.0)
      throw std::invalid_argument("CholeskyGaussianParams: zero diagonal in C");
  prec_ = c_ * c_.transpose();
}

CholeskyGaussianParams CholeskyGaussianParams::from_moments(const VectorXd& mu,
                                                            const MatrixXd& sigma) {
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("CholeskyGaussianParams: covariance is not positive definite");
  const int p = static_cast<int>(mu.size());
  MatrixXd prec = llt.solve(MatrixXd::Identity(p, p));
  prec = 0.5 * (prec + prec.transpose()).eval();
  return CholeskyGaussianParams(mu, mc::chol_lower(prec));
}

CholeskyGaussianParams CholeskyGaussianParams::from_lambda(const VectorXd& lambda) {
  // lambda = [mu; vech(C)], p recovered from the total length.
  const double len = static_cast<double>(lambda.size());
  const int p = static_cast<int>(std::llround((std::sqrt(9.0 + 8.0 * len) - 3.0) / 2.0));
  if (p + p * (p + 1) / 2 != lambda.size())
    throw std::invalid_argument("CholeskyGaussianParams: lambda has invalid length");
  const VectorXd mu = lambda.head(p);
  const MatrixXd sym = mc::vech_to_sym(lambda.tail(p * (p + 1) / 2));
  MatrixXd c = sym.triangularView<Eigen::Lower>();
  return CholeskyGaussianParams(mu, c);
}

MatrixXd CholeskyGaussianParams::covariance() const {
  const int p = dim();
  // Sigma = C^{-T} C^{-1}
  MatrixXd cinv = c_.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(p, p));
  MatrixXd sigma = cinv.transpose() * cinv;
  return 0.5 * (sigma + sigma.transpose()).eval();
}

VectorXd CholeskyGaussianParams::lambda_vec() const {
  VectorXd l(lambda_dim());
  l << mu_, mc::vech_lower(c_);
  return l;
}

int CholeskyGaussianParams::lambda_dim() const {
  const int p = dim();
  return p + p * (p + 1) / 2;
}

double CholeskyGaussianParams::log_density(const VectorXd& theta) const {
  // log q = -p/2 log(2 pi) + log|det C| - 1/2 ||C^T (theta - mu)||^2;
  // |det C| = prod |C_ii| handles the sign-free diagonal.
  const VectorXd z = c_.transpose() * (theta - mu_);
  return -0.5 * dim() * kLog2Pi + c_.diagonal().array().abs().log().sum() -
         0.5 * z.squaredNorm();
}

VectorXd CholeskyGaussianParams::score(const VectorXd& theta) const {
  const int p = dim();
  const VectorXd z = theta - mu_;
  MatrixXd grad_c = -z * (z.transpose() * c_);
  grad_c.diagonal() += c_.diagonal().cwiseInverse();
  VectorXd s(lambda_dim());
  s.head(p) = prec_ * z;
  s.tail(lambda_dim() - p) = mc::vech_lower(grad_c);
  return s;
}

MatrixXd CholeskyGaussianParams::fisher_i22() const {
  const int p = dim();
  const MatrixXd& dup = mc::duplication_matrix(p);
  const MatrixXd& dplus = mc::dup_mp_inverse(p);
  const MatrixXd& elim = mc::elimination_matrix(p);
  const MatrixXd eye = MatrixXd::Identity(p, p);
  const MatrixXd sigma = covariance();
  const MatrixXd half = elim * mc::kron(c_.transpose(), eye) * dup * dplus;
  MatrixXd i22 = 2.0 * half * mc::kron(sigma, sigma) * half.transpose();
  return 0.5 * (i22 + i22.transpose()).eval();
}

MatrixXd CholeskyGaussianParams::fisher() const {
  const int p = dim();
  const int m = lambda_dim() - p;
  MatrixXd out = MatrixXd::Zero(p + m, p + m);
  out.topLeftCorner(p, p) = prec_;
  out.bottomRightCorner(m, m) = fisher_i22();
  return out;
}

VectorXd CholeskyGaussianParams::natural_gradient(const VectorXd& hhat) const {
  const int p = dim();
  if (hhat.size() != lambda_dim())
    throw std::invalid_argument("natural_gradient: gradient has wrong length");
  const VectorXd h1 = hhat.head(p);
  const VectorXd h2 = hhat.tail(lambda_dim() - p);
  // Sigma h1 via two triangular solves with C.
  VectorXd t = c_.triangularView<Eigen::Lower>().solve(h1);
  VectorXd g1 = c_.transpose().triangularView<Eigen::Upper>().solve(t);
  Eigen::LDLT<MatrixXd> ldlt(fisher_i22());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::runtime_error("natural_gradient: I22 block is singular (degenerate C)");
  VectorXd out(lambda_dim());
  out.head(p) = g1;
  out.tail(h2.size()) = ldlt.solve(h2);
  return out;
}

VectorXd CholeskyGaussianParams::sample(RngStream& rng) const {
  // theta = mu + C^{-T} z
  const VectorXd z = rng.normal_vector(dim());
  return mu_ + c_.transpose().triangularView<Eigen::Upper>().solve(z);
}

MatrixXd CholeskyGaussianParams::sample_many(int count, RngStream& rng) const {
  MatrixXd out(dim(), count);
  for (int i = 0; i < count; ++i) out.col(i) = sample(rng);
  return out;
}

}  // namespace vbsl
