#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "vbsl/rng.hpp"

namespace testutil {

// Central finite difference with step h = 1e-5 * max(1, |x_i|).
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x) {
  Eigen::VectorXd grad(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd lo = x, hi = x;
    lo[i] -= h;
    hi[i] += h;
    grad[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return grad;
}

struct MonteCarloMean {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MonteCarloMean mc_mean(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// Random symmetric positive definite matrix A = B B^T + d I.
inline Eigen::MatrixXd random_spd(int d, vbsl::RngStream& rng) {
  Eigen::MatrixXd b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
  return b * b.transpose() + static_cast<double>(d) * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::MatrixXd random_symmetric(int d, vbsl::RngStream& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      a(i, j) = rng.normal();
      a(j, i) = a(i, j);
    }
  return a;
}

}  // namespace testutil
