#include "vbsl/models/alpha_stable.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vbsl/stats.hpp"

namespace vbsl::stable {

namespace {

constexpr double kPi = M_PI;

double sample_standard_s1(double alpha, double beta, RngStream& rng) {
  const double v = kPi * (rng.uniform() - 0.5);  // U(-pi/2, pi/2)
  const double w = rng.exponential();
  if (alpha == 1.0) {
    const double hp = 0.5 * kPi;
    return ((hp + beta * v) * std::tan(v) -
            beta * std::log((hp * w * std::cos(v)) / (hp + beta * v))) /
           hp;
  }
  const double ta = std::tan(0.5 * kPi * alpha);
  const double b = std::atan(beta * ta) / alpha;
  const double scale = std::pow(1.0 + beta * beta * ta * ta, 0.5 / alpha);
  return scale * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
}

// --- Quantile estimator lookup tables ---------------------------------
// nu_alpha = (q95-q05)/(q75-q25), nu_beta = (q95+q05-2 q50)/(q95-q05).

constexpr int kNa = 15, kNb = 7;
constexpr double kNuAlphaGrid[kNa] = {2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5,
                                      4.0,   5.0, 6.0, 8.0, 10.0, 15.0, 25.0};
constexpr double kNuBetaGrid[kNb] = {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};

constexpr double kAlphaTable[kNa][kNb] = {
    {2.000, 2.000, 2.000, 2.000, 2.000, 2.000, 2.000},
    {1.916, 1.924, 1.924, 1.924, 1.924, 1.924, 1.924},
    {1.808, 1.813, 1.829, 1.829, 1.829, 1.829, 1.829},
    {1.729, 1.730, 1.737, 1.745, 1.745, 1.745, 1.745},
    {1.664, 1.663, 1.663, 1.668, 1.676, 1.676, 1.676},
    {1.563, 1.560, 1.553, 1.548, 1.547, 1.547, 1.547},
    {1.484, 1.480, 1.471, 1.460, 1.448, 1.438, 1.438},
    {1.391, 1.386, 1.378, 1.364, 1.337, 1.318, 1.318},
    {1.279, 1.273, 1.266, 1.250, 1.210, 1.184, 1.150},
    {1.128, 1.121, 1.114, 1.101, 1.067, 1.027, 0.973},
    {1.029, 1.021, 1.014, 1.004, 0.974, 0.935, 0.874},
    {0.896, 0.892, 0.887, 0.883, 0.855, 0.823, 0.769},
    {0.818, 0.812, 0.806, 0.801, 0.780, 0.756, 0.691},
    {0.698, 0.695, 0.692, 0.689, 0.676, 0.656, 0.597},
    {0.593, 0.590, 0.588, 0.586, 0.579, 0.563, 0.513}};

constexpr double kBetaTable[kNa][kNb] = {
    {0.0, 2.160, 1.000, 1.000, 1.000, 1.000, 1.000},
    {0.0, 1.592, 3.390, 1.000, 1.000, 1.000, 1.000},
    {0.0, 0.759, 1.800, 1.000, 1.000, 1.000, 1.000},
    {0.0, 0.482, 1.048, 1.694, 1.000, 1.000, 1.000},
    {0.0, 0.360, 0.760, 1.232, 2.229, 1.000, 1.000},
    {0.0, 0.253, 0.518, 0.823, 1.575, 1.000, 1.000},
    {0.0, 0.203, 0.410, 0.632, 1.244, 1.906, 1.000},
    {0.0, 0.165, 0.332, 0.499, 0.943, 1.560, 1.000},
    {0.0, 0.136, 0.271, 0.404, 0.689, 1.230, 2.195},
    {0.0, 0.109, 0.216, 0.323, 0.539, 0.827, 1.917},
    {0.0, 0.096, 0.190, 0.284, 0.472, 0.693, 1.759},
    {0.0, 0.082, 0.163, 0.243, 0.412, 0.601, 1.596},
    {0.0, 0.074, 0.147, 0.220, 0.377, 0.546, 1.482},
    {0.0, 0.064, 0.128, 0.191, 0.330, 0.478, 1.362},
    {0.0, 0.056, 0.112, 0.167, 0.285, 0.428, 1.274}};

// Grids for the scale/location back-out, indexed by (alpha, |beta|) with
// alpha ascending 0.5..2.0.
constexpr int kMa = 16, kMb = 5;
constexpr double kAlphaGrid[kMa] = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2,
                                    1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
constexpr double kBetaGrid[kMb] = {0.0, 0.25, 0.5, 0.75, 1.0};

// (q75 - q25) / gamma
constexpr double kScaleTable[kMa][kMb] = {
    {2.588, 3.073, 4.534, 6.636, 9.144},
    {2.337, 2.634, 3.542, 4.808, 6.247},
    {2.189, 2.392, 3.004, 3.844, 4.775},
    {2.098, 2.244, 2.676, 3.265, 3.912},
    {2.040, 2.149, 2.461, 2.886, 3.356},
    {2.000, 2.085, 2.311, 2.624, 2.973},
    {1.980, 2.040, 2.205, 2.435, 2.696},
    {1.965, 2.007, 2.125, 2.294, 2.491},
    {1.955, 1.984, 2.067, 2.188, 2.333},
    {1.946, 1.967, 2.022, 2.106, 2.211},
    {1.939, 1.952, 1.988, 2.045, 2.116},
    {1.933, 1.940, 1.962, 1.997, 2.043},
    {1.927, 1.930, 1.943, 1.961, 1.987},
    {1.921, 1.922, 1.927, 1.936, 1.947},
    {1.914, 1.915, 1.916, 1.918, 1.921},
    {1.908, 1.908, 1.908, 1.908, 1.908}};

// (zeta - q50) / gamma, where zeta is the continuous-parametrization location.
constexpr double kLocTable[kMa][kMb] = {
    {0.0, -0.061, -0.279, -0.659, -1.198},
    {0.0, -0.078, -0.272, -0.581, -0.997},
    {0.0, -0.089, -0.262, -0.520, -0.853},
    {0.0, -0.096, -0.250, -0.469, -0.742},
    {0.0, -0.099, -0.237, -0.424, -0.652},
    {0.0, -0.098, -0.223, -0.380, -0.576},
    {0.0, -0.095, -0.208, -0.346, -0.508},
    {0.0, -0.090, -0.192, -0.310, -0.447},
    {0.0, -0.084, -0.173, -0.276, -0.390},
    {0.0, -0.075, -0.154, -0.241, -0.335},
    {0.0, -0.066, -0.134, -0.206, -0.283},
    {0.0, -0.056, -0.111, -0.170, -0.232},
    {0.0, -0.043, -0.088, -0.132, -0.179},
    {0.0, -0.030, -0.061, -0.092, -0.123},
    {0.0, -0.017, -0.032, -0.049, -0.064},
    {0.0, 0.0, 0.0, 0.0, 0.0}};

double clamp_flag(double x, double lo, double hi, bool& flagged) {
  if (x < lo) {
    flagged = true;
    return lo;
  }
  if (x > hi) {
    flagged = true;
    return hi;
  }
  return x;
}

template <int NX, int NY>
double bilinear(const double (&xs)[NX], const double (&ys)[NY], const double (&table)[NX][NY],
                double x, double y) {
  auto bracket = [](const double* grid, int n, double v) {
    int i = static_cast<int>(std::upper_bound(grid, grid + n, v) - grid) - 1;
    return std::clamp(i, 0, n - 2);
  };
  const int i = bracket(xs, NX, x);
  const int j = bracket(ys, NY, y);
  const double tx = (x - xs[i]) / (xs[i + 1] - xs[i]);
  const double ty = (y - ys[j]) / (ys[j + 1] - ys[j]);
  return (1 - tx) * (1 - ty) * table[i][j] + tx * (1 - ty) * table[i + 1][j] +
         (1 - tx) * ty * table[i][j + 1] + tx * ty * table[i + 1][j + 1];
}

// Type-7 quantile of sorted data.
double sorted_quantile(const std::vector<double>& x, double p) {
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

}  // namespace

double sample(double alpha, double beta, double gamma, double delta, RngStream& rng) {
  const double z1 = sample_standard_s1(alpha, beta, rng);
  if (alpha == 1.0) return gamma * z1 + 2.0 / kPi * beta * gamma * std::log(gamma) + delta;
  return gamma * (z1 - beta * std::tan(0.5 * kPi * alpha)) + delta;
}

QuantileEstimate quantile_estimate(std::vector<double> data) {
  if (data.size() < 5)
    throw std::invalid_argument("quantile_estimate: at least five observations required");
  std::sort(data.begin(), data.end());
  const double q05 = sorted_quantile(data, 0.05);
  const double q25 = sorted_quantile(data, 0.25);
  const double q50 = sorted_quantile(data, 0.50);
  const double q75 = sorted_quantile(data, 0.75);
  const double q95 = sorted_quantile(data, 0.95);

  QuantileEstimate est;
  const double iqr = q75 - q25;
  const double span = q95 - q05;
  if (!(iqr > 0.0) || !(span > 0.0)) {
    est.clamped = true;
    est.gamma = 1e-8;
    est.delta = q50;
    return est;
  }
  double nu_a = clamp_flag(span / iqr, kNuAlphaGrid[0], kNuAlphaGrid[kNa - 1], est.clamped);
  double nu_b = clamp_flag((q95 + q05 - 2.0 * q50) / span, -1.0, 1.0, est.clamped);
  const double sgn_b = nu_b < 0.0 ? -1.0 : 1.0;

  est.alpha = std::clamp(bilinear(kNuAlphaGrid, kNuBetaGrid, kAlphaTable, nu_a, std::abs(nu_b)),
                         0.5, 2.0);
  est.beta = sgn_b * clamp_flag(bilinear(kNuAlphaGrid, kNuBetaGrid, kBetaTable, nu_a,
                                         std::abs(nu_b)),
                                0.0, 1.0, est.clamped);
  const double ab = std::abs(est.beta);
  est.gamma = iqr / bilinear(kAlphaGrid, kBetaGrid, kScaleTable, est.alpha, ab);
  est.delta = q50 + est.gamma * sgn_b * bilinear(kAlphaGrid, kBetaGrid, kLocTable, est.alpha, ab);
  return est;
}

Eigen::Vector4d to_tilde(const Eigen::Vector4d& natural) {
  const double a = natural[0], b = natural[1], g = natural[2], d = natural[3];
  if (!(a > 1.1 && a < 2.0 && b > -1.0 && b < 1.0 && g > 0.0))
    throw std::invalid_argument("to_tilde: parameters outside the constrained ranges");
  return {std::log((a - 1.1) / (2.0 - a)), std::log((b + 1.0) / (1.0 - b)), std::log(g), d};
}

Eigen::Vector4d from_tilde(const Eigen::Vector4d& tilde) {
  const double sig = 1.0 / (1.0 + std::exp(-tilde[0]));
  return {1.1 + 0.9 * sig, std::tanh(0.5 * tilde[1]), std::exp(tilde[2]), tilde[3]};
}

}  // namespace vbsl::stable

namespace vbsl {

using Eigen::Vector4d;
using Eigen::VectorXd;

AlphaStableModel::AlphaStableModel(std::vector<double> data) : data_(std::move(data)) {
  if (data_.size() < 8) throw std::invalid_argument("alpha_stable: too few observations");
  observed_summary_ = summary_statistic(data_);
  transforms_.resize(4);
  transforms_[0] = {"logit_1.1_2",
                    [](double w) { return 1.1 + 0.9 / (1.0 + std::exp(-w)); },
                    [](double a) { return std::log((a - 1.1) / (2.0 - a)); },
                    [](double a) { return 0.9 / ((a - 1.1) * (2.0 - a)); }};
  transforms_[1] = {"logit_m1_1",
                    [](double w) { return std::tanh(0.5 * w); },
                    [](double b) { return std::log((b + 1.0) / (1.0 - b)); },
                    [](double b) { return 2.0 / ((1.0 + b) * (1.0 - b)); }};
  transforms_[2] = {"log",
                    [](double w) { return std::exp(w); },
                    [](double g) { return std::log(g); },
                    [](double g) { return 1.0 / g; }};
  transforms_[3] = ScalarTransform{};
}

Vector4d AlphaStableModel::summary_statistic(std::vector<double> data) {
  auto est = stable::quantile_estimate(std::move(data));
  // Clamp into the constrained box so the logit maps stay finite.
  const double a = std::clamp(est.alpha, 1.1 + 1e-3, 2.0 - 1e-3);
  const double b = std::clamp(est.beta, -1.0 + 1e-3, 1.0 - 1e-3);
  const double g = std::max(est.gamma, 1e-8);
  return stable::to_tilde(Vector4d(a, b, g, est.delta));
}

SummaryBatch AlphaStableModel::simulate_summaries(const VectorXd& theta, int count,
                                                  RngStream& rng) const {
  const Vector4d nat = stable::from_tilde(theta);
  SummaryBatch batch;
  batch.samples.resize(4, count);
  std::vector<double> draws(data_.size());
  for (int c = 0; c < count; ++c) {
    for (auto& x : draws) x = stable::sample(nat[0], nat[1], nat[2], nat[3], rng);
    batch.samples.col(c) = summary_statistic(draws);
  }
  return batch;
}

double AlphaStableModel::log_prior(const VectorXd& theta) const {
  return -2.0 * kLog2Pi - 0.5 * theta.squaredNorm();
}

}  // namespace vbsl
