#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "vbsl/matrix_calculus.hpp"
#include "vbsl/rng.hpp"
#include "test_helpers.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace mc = vbsl::matcalc;

TEST_CASE("vec stacks columns") {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  const VectorXd v = mc::vec(a);
  CHECK(v.size() == 4);
  CHECK(v[0] == 1);
  CHECK(v[1] == 3);
  CHECK(v[2] == 2);
  CHECK(v[3] == 4);

  MatrixXd one(1, 1);
  one << 7.5;
  CHECK(mc::vec(one)[0] == 7.5);
}

TEST_CASE("vec round trip on random 3x3") {
  vbsl::RngStream rng(11);
  MatrixXd a(3, 3);
  for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
  CHECK((mc::vec_inverse(mc::vec(a)) - a).norm() == 0.0);
}

TEST_CASE("vech lower-triangle column order") {
  MatrixXd a(2, 2);
  a << 1, 2, 2, 3;
  const VectorXd v = mc::vech(a);
  CHECK(v.size() == 3);
  CHECK(v[0] == 1);
  CHECK(v[1] == 2);
  CHECK(v[2] == 3);

  const VectorXd vi = mc::vech(MatrixXd::Identity(3, 3));
  VectorXd expect(6);
  expect << 1, 0, 0, 1, 0, 1;
  CHECK((vi - expect).norm() == 0.0);
}

TEST_CASE("vech rejects asymmetric input") {
  MatrixXd a(2, 2);
  a << 1, 2, 2.5, 3;
  CHECK_THROWS_AS(mc::vech(a), std::invalid_argument);
}

TEST_CASE("duplication relates vech and vec for symmetric matrices") {
  vbsl::RngStream rng(5);
  for (int d = 1; d <= 5; ++d) {
    const MatrixXd a = testutil::random_symmetric(d, rng);
    const auto& dd = mc::duplication_matrix(d);
    const auto& ld = mc::elimination_matrix(d);
    const auto& dp = mc::dup_mp_inverse(d);
    CHECK((dd * mc::vech(a) - mc::vec(a)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ld * mc::vec(a) - mc::vech(a)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dp * mc::vec(a) - mc::vech(a)).cwiseAbs().maxCoeff() < 1e-12);
    const int m = d * (d + 1) / 2;
    CHECK((dp * dd - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("duplication matrix d=1 and d=2 by enumeration") {
  CHECK(mc::duplication_matrix(1)(0, 0) == 1.0);
  CHECK(mc::elimination_matrix(1)(0, 0) == 1.0);
  CHECK(mc::dup_mp_inverse(1)(0, 0) == 1.0);

  MatrixXd expect(4, 3);
  expect << 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1;
  CHECK((mc::duplication_matrix(2) - expect).norm() == 0.0);
}

TEST_CASE("kron satisfies vec(BAC) = (C^T kron B) vec(A)") {
  vbsl::RngStream rng(17);
  auto randmat = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
  };
  const MatrixXd b = randmat(4, 2), a = randmat(2, 3), c = randmat(3, 5);
  const VectorXd lhs = mc::vec(b * a * c);
  const VectorXd rhs = mc::kron(c.transpose(), b) * mc::vec(a);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("positive definiteness by Cholesky success") {
  CHECK(mc::is_positive_definite(MatrixXd::Identity(3, 3)));
  MatrixXd a(2, 2);
  a << 1, 2, 2, 1;  // eigenvalues 3 and -1
  CHECK_FALSE(mc::is_positive_definite(a));
  CHECK_FALSE(mc::is_positive_definite(MatrixXd::Zero(2, 2)));
}

TEST_CASE("cholesky round trip on random PD matrices") {
  vbsl::RngStream rng(23);
  for (int d = 1; d <= 6; ++d) {
    const MatrixXd a = testutil::random_spd(d, rng);
    const MatrixXd l = mc::chol_lower(a);
    CHECK((l * l.transpose() - a).norm() / a.norm() < 1e-10);
  }
  CHECK_THROWS_AS(mc::chol_lower(MatrixXd::Zero(2, 2)), std::runtime_error);
}

TEST_CASE("vech_to_sym inverts vech") {
  vbsl::RngStream rng(31);
  const MatrixXd a = testutil::random_symmetric(4, rng);
  CHECK((mc::vech_to_sym(mc::vech(a)) - a).norm() == 0.0);
}
