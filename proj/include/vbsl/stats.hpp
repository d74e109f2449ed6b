#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace vbsl {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double norm_logpdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * z * z / var;
}

inline double digamma(double x) { return boost::math::digamma(x); }

}  // namespace vbsl
