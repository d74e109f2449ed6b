#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "vbsl/gaussian_variational.hpp"
#include "vbsl/matrix_calculus.hpp"
#include "test_helpers.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using vbsl::CholeskyGaussianParams;
using vbsl::NaturalGaussianParams;
namespace mc = vbsl::matcalc;

namespace {

NaturalGaussianParams random_natural(int p, vbsl::RngStream& rng) {
  const VectorXd mu = rng.normal_vector(p);
  const MatrixXd sigma = testutil::random_spd(p, rng) / p;
  return NaturalGaussianParams::from_moments(mu, sigma);
}

CholeskyGaussianParams random_cholesky(int p, vbsl::RngStream& rng) {
  MatrixXd c = MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j)
    for (int i = j; i < p; ++i) c(i, j) = (i == j) ? 0.5 + rng.uniform() : 0.4 * rng.normal();
  return CholeskyGaussianParams(rng.normal_vector(p), c);
}

}  // namespace

TEST_CASE("natural parameters match the scalar formulas") {
  const auto par = NaturalGaussianParams::from_moments(VectorXd::Constant(1, 1.0),
                                                       MatrixXd::Constant(1, 1, 2.0));
  CHECK(par.lambda1()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(par.lambda2()[0] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("natural parameters at the standard normal") {
  const int p = 3;
  const auto par = NaturalGaussianParams::from_moments(VectorXd::Zero(p), MatrixXd::Identity(p, p));
  CHECK(par.lambda1().norm() == doctest::Approx(0.0));
  const VectorXd expect =
      -0.5 * (mc::duplication_matrix(p).transpose() * mc::vec(MatrixXd::Identity(p, p)));
  CHECK((par.lambda2() - expect).norm() < 1e-14);
}

TEST_CASE("moment round trip through the natural parametrization") {
  vbsl::RngStream rng(3);
  const VectorXd mu = rng.normal_vector(3);
  const MatrixXd sigma = testutil::random_spd(3, rng);
  const auto par = NaturalGaussianParams::from_moments(mu, sigma);
  const auto back = NaturalGaussianParams::from_lambda(par.lambda1(), par.lambda2());
  REQUIRE(back.has_value());
  CHECK((back->mean() - mu).norm() / mu.norm() < 1e-8);
  CHECK((back->covariance() - sigma).norm() / sigma.norm() < 1e-8);
}

TEST_CASE("non-PD inputs are rejected") {
  MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(NaturalGaussianParams::from_moments(VectorXd::Zero(2), bad),
                  std::invalid_argument);
  // lambda2 implying a negative precision: p=1, lambda2 = +0.5 -> prec = -1.
  CHECK_FALSE(NaturalGaussianParams::from_lambda(VectorXd::Zero(1), VectorXd::Constant(1, 0.5))
                  .has_value());
}

TEST_CASE("natural score at theta = mu with identity covariance") {
  const int p = 2;
  const auto par = NaturalGaussianParams::from_moments(VectorXd::Zero(p), MatrixXd::Identity(p, p));
  const VectorXd s = par.score(VectorXd::Zero(p));
  CHECK(s.head(p).norm() == doctest::Approx(0.0));
  const VectorXd expect = -mc::vech(MatrixXd::Identity(p, p));
  CHECK((s.tail(3) - expect).norm() < 1e-14);
}

TEST_CASE("natural score matches finite differences of log q in lambda (p=1)") {
  vbsl::RngStream rng(7);
  const auto par = NaturalGaussianParams::from_moments(VectorXd::Constant(1, 0.4),
                                                       MatrixXd::Constant(1, 1, 1.7));
  const VectorXd theta = rng.normal_vector(1);
  const VectorXd lambda = par.lambda_vec();
  const auto logq = [&](const VectorXd& l) {
    const auto q = NaturalGaussianParams::from_lambda(l.head(1), l.tail(1));
    REQUIRE(q.has_value());
    return q->log_density(theta);
  };
  const VectorXd fd = testutil::finite_difference(logq, lambda);
  const VectorXd an = par.score(theta);
  CHECK((fd - an).norm() / an.norm() < 1e-4);
}

TEST_CASE("score identity: MC mean of the score vanishes") {
  vbsl::RngStream rng(19);
  const auto par = random_natural(2, rng);
  const auto chol = random_cholesky(2, rng);
  const int m = 100000;
  for (int which = 0; which < 2; ++which) {
    const int dim = which == 0 ? par.lambda_dim() : chol.lambda_dim();
    MatrixXd scores(dim, m);
    for (int i = 0; i < m; ++i) {
      if (which == 0)
        scores.col(i) = par.score(par.sample(rng));
      else
        scores.col(i) = chol.score(chol.sample(rng));
    }
    const VectorXd mean = scores.rowwise().mean();
    const MatrixXd centered = scores.colwise() - mean;
    const VectorXd sd = (centered.array().square().rowwise().sum() / (m - 1.0)).sqrt();
    for (int i = 0; i < dim; ++i)
      CHECK(std::abs(mean[i]) < 5.0 * sd[i] / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("inverse Fisher information at the scalar standard normal") {
  const auto par =
      NaturalGaussianParams::from_moments(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
  const MatrixXd fi = par.fisher_inverse();
  CHECK(fi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fi(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fi(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("inverse Fisher agrees with MC covariance of T(theta), p=2") {
  vbsl::RngStream rng(29);
  const auto par = random_natural(2, rng);
  const int dim = par.lambda_dim();
  const int m = 1000000;
  MatrixXd t(dim, m);
  for (int i = 0; i < m; ++i) {
    const auto st = vbsl::sufficient_stat(par.sample(rng));
    t.col(i) << st.t1, st.t2;
  }
  const VectorXd mean = t.rowwise().mean();
  const MatrixXd centered = t.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / (m - 1.0);

  // I_F = Cov(T), so the analytic inverse times the MC covariance is identity.
  const MatrixXd fi = par.fisher_inverse();
  const MatrixXd prod = fi * cov;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      double se2 = 0.0;
      for (int k = 0; k < dim; ++k) {
        const Eigen::ArrayXd prods = centered.row(i).array() * centered.row(k).array();
        const double v = (prods - prods.mean()).square().sum() / (m - 1.0);
        se2 += fi(i, k) * fi(i, k) * v / m;
      }
      const double target = (i == j) ? 1.0 : 0.0;
      CHECK(std::abs(prod(i, j) - target) < 3.0 * std::sqrt(se2) + 1e-9);
    }
  }
  CHECK((fi - fi.transpose()).norm() < 1e-12);
}

TEST_CASE("cholesky score at theta = mu, p=1") {
  const double c = 1.7;
  CholeskyGaussianParams par(VectorXd::Constant(1, 0.3), MatrixXd::Constant(1, 1, c));
  const VectorXd s = par.score(VectorXd::Constant(1, 0.3));
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[1] == doctest::Approx(1.0 / c).epsilon(1e-12));
}

TEST_CASE("cholesky score matches finite differences of log q in (mu, vech C)") {
  vbsl::RngStream rng(41);
  const auto par = random_cholesky(3, rng);
  const VectorXd theta = par.mean() + 0.7 * rng.normal_vector(3);
  const auto logq = [&](const VectorXd& l) {
    return CholeskyGaussianParams::from_lambda(l).log_density(theta);
  };
  const VectorXd fd = testutil::finite_difference(logq, par.lambda_vec());
  const VectorXd an = par.score(theta);
  CHECK((fd - an).norm() / an.norm() < 1e-4);
}

TEST_CASE("cholesky Fisher blocks, p=1 closed form") {
  const double c = 1.3;
  CholeskyGaussianParams par(VectorXd::Zero(1), MatrixXd::Constant(1, 1, c));
  const MatrixXd f = par.fisher();
  CHECK(f(0, 0) == doctest::Approx(c * c).epsilon(1e-12));
  CHECK(f(1, 1) == doctest::Approx(2.0 / (c * c)).epsilon(1e-10));
  CHECK(f(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("cholesky Fisher agrees with MC covariance of the score, p=2") {
  vbsl::RngStream rng(43);
  const auto par = random_cholesky(2, rng);
  const int dim = par.lambda_dim();
  const int m = 1000000;
  MatrixXd scores(dim, m);
  for (int i = 0; i < m; ++i) scores.col(i) = par.score(par.sample(rng));
  const VectorXd mean = scores.rowwise().mean();
  const MatrixXd centered = scores.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / (m - 1.0);
  const MatrixXd fisher = par.fisher();
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const Eigen::ArrayXd prods = centered.row(i).array() * centered.row(j).array();
      const double se = std::sqrt((prods - prods.mean()).square().sum() / (m - 1.0) / m);
      CHECK(std::abs(cov(i, j) - fisher(i, j)) < 3.0 * se + 1e-9);
    }
  }
  // The mean/C cross block vanishes identically.
  CHECK(fisher.topRightCorner(2, 3).norm() == 0.0);
}

TEST_CASE("cholesky I22 is symmetric positive definite for random C") {
  vbsl::RngStream rng(47);
  for (int rep = 0; rep < 5; ++rep) {
    const auto par = random_cholesky(3, rng);
    const MatrixXd i22 = par.fisher_i22();
    CHECK((i22 - i22.transpose()).norm() < 1e-12);
    CHECK(mc::is_positive_definite(i22));
  }
}

TEST_CASE("column sign flips of C leave Sigma, the density and I22 unchanged") {
  vbsl::RngStream rng(53);
  const int p = 3;
  const auto par = random_cholesky(p, rng);
  const VectorXd theta = rng.normal_vector(p);
  for (int j = 0; j < p; ++j) {
    MatrixXd flipped = par.c_lower();
    flipped.col(j) *= -1.0;
    CholeskyGaussianParams par2(par.mean(), flipped);
    CHECK((par2.covariance() - par.covariance()).norm() < 1e-12);
    CHECK(par2.log_density(theta) == doctest::Approx(par.log_density(theta)).epsilon(1e-12));
    CHECK((par2.fisher_i22() - par.fisher_i22()).norm() / par.fisher_i22().norm() < 1e-10);
  }
}

TEST_CASE("log densities agree across parametrizations at the same moments") {
  vbsl::RngStream rng(59);
  const VectorXd mu = rng.normal_vector(3);
  const MatrixXd sigma = testutil::random_spd(3, rng);
  const auto nat = NaturalGaussianParams::from_moments(mu, sigma);
  const auto chol = CholeskyGaussianParams::from_moments(mu, sigma);
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd theta = mu + rng.normal_vector(3);
    CHECK(nat.log_density(theta) == doctest::Approx(chol.log_density(theta)).epsilon(1e-10));
  }
}

TEST_CASE("sampling matches the requested moments") {
  vbsl::RngStream rng(61);
  const VectorXd mu = rng.normal_vector(2);
  const MatrixXd sigma = testutil::random_spd(2, rng) / 2.0;
  const auto par = NaturalGaussianParams::from_moments(mu, sigma);
  const int m = 1000000;
  const MatrixXd draws = par.sample_many(m, rng);
  const VectorXd mean = draws.rowwise().mean();
  const MatrixXd centered = draws.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / (m - 1.0);
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt(sigma(i, i) / m);
    CHECK(std::abs(mean[i] - mu[i]) < 4.0 * se);
    for (int j = 0; j < 2; ++j) {
      const Eigen::ArrayXd prods = centered.row(i).array() * centered.row(j).array();
      const double cse = std::sqrt((prods - prods.mean()).square().sum() / (m - 1.0) / m);
      CHECK(std::abs(cov(i, j) - sigma(i, j)) < 4.0 * cse + 1e-9);
    }
  }
}

TEST_CASE("same seed gives identical draws") {
  vbsl::RngStream a(99), b(99);
  const auto par =
      NaturalGaussianParams::from_moments(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK((par.sample_many(10, a) - par.sample_many(10, b)).norm() == 0.0);
}

TEST_CASE("p=1 sampling paths coincide across parametrizations") {
  const double sigma = 1.6;
  const auto nat = NaturalGaussianParams::from_moments(VectorXd::Constant(1, 0.2),
                                                       MatrixXd::Constant(1, 1, sigma * sigma));
  CholeskyGaussianParams chol(VectorXd::Constant(1, 0.2), MatrixXd::Constant(1, 1, 1.0 / sigma));
  vbsl::RngStream a(7), b(7);
  for (int i = 0; i < 50; ++i)
    CHECK(nat.sample(a)[0] == doctest::Approx(chol.sample(b)[0]).epsilon(1e-12));
}

TEST_CASE("sufficient statistic consistency") {
  vbsl::RngStream rng(67);
  const VectorXd theta = rng.normal_vector(3);
  const auto st = vbsl::sufficient_stat(theta);
  CHECK((st.t2 - mc::vech(theta * theta.transpose())).norm() < 1e-14);
}
