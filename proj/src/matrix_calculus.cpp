#include "vbsl/matrix_calculus.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

namespace vbsl::matcalc {

bool is_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

Eigen::VectorXd vec(const Eigen::MatrixXd& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

Eigen::MatrixXd vec_inverse(const Eigen::VectorXd& v) {
  const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (static_cast<long>(d) * d != v.size())
    throw std::invalid_argument("vec_inverse: length is not a perfect square");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d);
}

Eigen::VectorXd vech(const Eigen::MatrixXd& a) {
  if (!is_symmetric(a)) throw std::invalid_argument("vech: matrix is not symmetric");
  return vech_lower(a);
}

Eigen::VectorXd vech_lower(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("vech_lower: matrix is not square");
  const int d = static_cast<int>(a.rows());
  Eigen::VectorXd v(d * (d + 1) / 2);
  int k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) v[k++] = a(i, j);
  return v;
}

Eigen::MatrixXd vech_to_sym(const Eigen::VectorXd& v) {
  const int m = static_cast<int>(v.size());
  const int d = static_cast<int>(std::llround((std::sqrt(8.0 * m + 1.0) - 1.0) / 2.0));
  if (d * (d + 1) / 2 != m)
    throw std::invalid_argument("vech_to_sym: length is not triangular");
  Eigen::MatrixXd a(d, d);
  int k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) {
      a(i, j) = v[k];
      a(j, i) = v[k];
      ++k;
    }
  return a;
}

namespace {

// vech index of entry (i, j), i >= j, in column-major lower-triangle order.
int vech_index(int i, int j, int d) { return j * d - j * (j - 1) / 2 + (i - j); }

Eigen::MatrixXd build_duplication(int d) {
  Eigen::MatrixXd dd = Eigen::MatrixXd::Zero(d * d, d * (d + 1) / 2);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) {
      const int k = (i >= j) ? vech_index(i, j, d) : vech_index(j, i, d);
      dd(i + j * d, k) = 1.0;
    }
  return dd;
}

Eigen::MatrixXd build_elimination(int d) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d * (d + 1) / 2, d * d);
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) l(vech_index(i, j, d), i + j * d) = 1.0;
  return l;
}

Eigen::MatrixXd build_dup_mp_inverse(int d) {
  const Eigen::MatrixXd dd = build_duplication(d);
  // D^T D is diagonal (1 for diagonal entries, 2 for off-diagonal pairs).
  Eigen::VectorXd counts = dd.colwise().sum();
  return counts.cwiseInverse().asDiagonal() * dd.transpose();
}

const Eigen::MatrixXd& cached(int d, std::map<int, std::unique_ptr<Eigen::MatrixXd>>& cache,
                              Eigen::MatrixXd (*build)(int)) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[d];
  if (!slot) slot = std::make_unique<Eigen::MatrixXd>(build(d));
  return *slot;
}

}  // namespace

const Eigen::MatrixXd& duplication_matrix(int d) {
  if (d < 1) throw std::invalid_argument("duplication_matrix: d >= 1 required");
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  return cached(d, cache, build_duplication);
}

const Eigen::MatrixXd& elimination_matrix(int d) {
  if (d < 1) throw std::invalid_argument("elimination_matrix: d >= 1 required");
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  return cached(d, cache, build_elimination);
}

const Eigen::MatrixXd& dup_mp_inverse(int d) {
  if (d < 1) throw std::invalid_argument("dup_mp_inverse: d >= 1 required");
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  return cached(d, cache, build_dup_mp_inverse);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return Eigen::kroneckerProduct(a, b);
}

bool is_positive_definite(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.size() == 0) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("chol_lower: matrix is not positive definite");
  return llt.matrixL();
}

}  // namespace vbsl::matcalc
