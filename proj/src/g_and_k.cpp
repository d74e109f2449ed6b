#include "vbsl/models/g_and_k.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vbsl/stats.hpp"

namespace vbsl::gk {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double transform_normal(double z, const GkMargin& m, double c) {
  const double e = std::exp(-m.g * z);
  return m.a + m.b * (1.0 + c * (1.0 - e) / (1.0 + e)) * std::pow(1.0 + z * z, m.k) * z;
}

double quantile(double p, const GkMargin& m, double c) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("gk::quantile: p must be in (0, 1)");
  if (!(m.b > 0.0)) throw std::invalid_argument("gk::quantile: B > 0 required");
  if (!(m.k > -0.5)) throw std::invalid_argument("gk::quantile: k > -0.5 required");
  return transform_normal(norm_quantile(p), m, c);
}

MatrixXd correlation_cholesky(const VectorXd& w, int q) {
  if (q < 1 || q > 3) throw std::invalid_argument("gk: q must be 1, 2 or 3");
  if (w.size() != q * (q - 1) / 2)
    throw std::invalid_argument("gk: wrong number of correlation angles");
  MatrixXd l = MatrixXd::Identity(q, q);
  if (q == 1) return l;
  const auto angle = [&](int j) { return M_PI / (1.0 + std::exp(-w[j])); };
  if (q == 2) {
    const double g = angle(0);
    l(1, 0) = std::cos(g);
    l(1, 1) = std::sin(g);
    return l;
  }
  const double g1 = angle(0), g2 = angle(1), g3 = angle(2);
  l(1, 0) = std::cos(g1);
  l(1, 1) = std::sin(g1);
  l(2, 0) = std::cos(g2);
  l(2, 1) = std::sin(g2) * std::cos(g3);
  l(2, 2) = std::sin(g2) * std::sin(g3);
  return l;
}

MatrixXd simulate(const GkParams& params, int n, RngStream& rng) {
  const int q = params.q();
  const MatrixXd l = correlation_cholesky(params.w, q);
  MatrixXd out(n, q);
  VectorXd z(q);
  for (int i = 0; i < n; ++i) {
    z = l * rng.normal_vector(q);
    for (int r = 0; r < q; ++r) out(i, r) = transform_normal(z[r], params.margins[r]);
  }
  return out;
}

namespace {

// Type-7 octiles E_1..E_7 of one margin.
std::array<double, 8> octiles(const VectorXd& col) {
  std::vector<double> x(col.data(), col.data() + col.size());
  std::sort(x.begin(), x.end());
  std::array<double, 8> e{};  // e[j] = j/8 quantile, j = 1..7
  const double n1 = static_cast<double>(x.size()) - 1.0;
  for (int j = 1; j <= 7; ++j) {
    const double h = n1 * j / 8.0;
    const auto lo = static_cast<std::size_t>(h);
    e[j] = (lo + 1 < x.size()) ? x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo])
                               : x.back();
  }
  return e;
}

VectorXd normal_scores(const VectorXd& x) {
  const long n = x.size();
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0L);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) { return x[a] < x[b]; });
  VectorXd scores(n);
  for (long r = 0; r < n; ++r)
    scores[idx[r]] = norm_quantile((r + 1.0 - 0.375) / (n + 0.25));
  return scores;
}

}  // namespace

double normal_scores_correlation(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("normal_scores_correlation: mismatched or tiny inputs");
  const VectorXd sx = normal_scores(x);
  const VectorXd sy = normal_scores(y);
  const VectorXd cx = sx.array() - sx.mean();
  const VectorXd cy = sy.array() - sy.mean();
  return cx.dot(cy) / std::sqrt(cx.squaredNorm() * cy.squaredNorm());
}

VectorXd summaries(const MatrixXd& data) {
  const int q = static_cast<int>(data.cols());
  if (q < 1 || q > 3) throw std::invalid_argument("gk::summaries: q must be 1, 2 or 3");
  if (data.rows() < 8) throw std::invalid_argument("gk::summaries: at least 8 rows required");
  VectorXd s(4 * q + q * (q - 1) / 2);
  for (int r = 0; r < q; ++r) {
    const auto e = octiles(data.col(r));
    const double spread = e[6] - e[2];
    if (!(spread > 0.0)) throw std::runtime_error("gk::summaries: degenerate octile spread");
    s[4 * r + 0] = e[4];
    s[4 * r + 1] = spread;
    s[4 * r + 2] = (e[6] + e[2] - 2.0 * e[4]) / spread;
    s[4 * r + 3] = (e[7] - e[5] + e[3] - e[1]) / spread;
  }
  int k = 4 * q;
  for (int j = 0; j < q; ++j)
    for (int i = j + 1; i < q; ++i)
      s[k++] = normal_scores_correlation(data.col(i), data.col(j));
  return s;
}

namespace {

double logit_range(double x, double lo, double hi) { return std::log((x - lo) / (hi - x)); }
double inv_logit_range(double t, double lo, double hi) {
  return lo + (hi - lo) / (1.0 + std::exp(-t));
}

}  // namespace

VectorXd to_tilde(const GkParams& params) {
  const int q = params.q();
  VectorXd t(4 * q + q * (q - 1) / 2);
  for (int r = 0; r < q; ++r) {
    const auto& m = params.margins[r];
    if (!(m.a > -0.1 && m.a < 0.1 && m.b > 0.0 && m.b < 0.05 && m.g > -1.0 && m.g < 1.0 &&
          m.k > -0.2 && m.k < 0.5))
      throw std::invalid_argument("gk::to_tilde: margin parameters outside transform ranges");
    t[4 * r + 0] = 10.0 * logit_range(m.a, -0.1, 0.1);
    t[4 * r + 1] = logit_range(m.b, 0.0, 0.05);
    t[4 * r + 2] = logit_range(m.g, -1.0, 1.0);
    t[4 * r + 3] = logit_range(m.k, -0.2, 0.5);
  }
  t.tail(params.w.size()) = params.w;
  return t;
}

GkParams from_tilde(const VectorXd& tilde, int q) {
  if (tilde.size() != 4 * q + q * (q - 1) / 2)
    throw std::invalid_argument("gk::from_tilde: wrong parameter length");
  GkParams params;
  params.margins.resize(q);
  for (int r = 0; r < q; ++r) {
    auto& m = params.margins[r];
    m.a = inv_logit_range(tilde[4 * r + 0] / 10.0, -0.1, 0.1);
    m.b = inv_logit_range(tilde[4 * r + 1], 0.0, 0.05);
    m.g = inv_logit_range(tilde[4 * r + 2], -1.0, 1.0);
    m.k = inv_logit_range(tilde[4 * r + 3], -0.2, 0.5);
  }
  params.w = tilde.tail(q * (q - 1) / 2);
  return params;
}

}  // namespace vbsl::gk

namespace vbsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

GAndKModel::GAndKModel(MatrixXd observed_data, int q) : data_(std::move(observed_data)), q_(q) {
  if (q < 1 || q > 3) throw std::invalid_argument("g_and_k: q must be 1, 2 or 3");
  if (data_.cols() != q) throw std::invalid_argument("g_and_k: data has wrong column count");
  observed_summary_ = gk::summaries(data_);

  const auto range_transform = [](double lo, double hi, double pre) {
    ScalarTransform t;
    t.name = "logit_range";
    t.natural_from_working = [=](double w) { return lo + (hi - lo) / (1.0 + std::exp(-w / pre)); };
    t.working_from_natural = [=](double x) { return pre * std::log((x - lo) / (hi - x)); };
    t.dworking_dnatural = [=](double x) { return pre * (hi - lo) / ((x - lo) * (hi - x)); };
    return t;
  };
  transforms_.clear();
  for (int r = 0; r < q_; ++r) {
    transforms_.push_back(range_transform(-0.1, 0.1, 10.0));
    transforms_.push_back(range_transform(0.0, 0.05, 1.0));
    transforms_.push_back(range_transform(-1.0, 1.0, 1.0));
    transforms_.push_back(range_transform(-0.2, 0.5, 1.0));
  }
  for (int j = 0; j < q_ * (q_ - 1) / 2; ++j) transforms_.push_back(ScalarTransform{});
}

SummaryBatch GAndKModel::simulate_summaries(const VectorXd& theta, int count,
                                            RngStream& rng) const {
  const gk::GkParams params = gk::from_tilde(theta, q_);
  SummaryBatch batch;
  batch.samples.resize(summary_dim(), count);
  const int n = static_cast<int>(data_.rows());
  for (int c = 0; c < count; ++c)
    batch.samples.col(c) = gk::summaries(gk::simulate(params, n, rng));
  return batch;
}

double GAndKModel::log_prior(const VectorXd& theta) const {
  double lp = 0.0;
  for (int r = 0; r < 4 * q_; ++r) lp += norm_logpdf(theta[r], 0.0, 4.0);
  for (int j = 4 * q_; j < theta.size(); ++j) lp += norm_logpdf(theta[j], 0.0, 1.75 * 1.75);
  return lp;
}

}  // namespace vbsl
