#pragma once

#include <Eigen/Dense>

namespace vbsl::matcalc {

// Symmetry test with tolerance max|A - A^T| <= 1e-10 * max(1, max|A|).
bool is_symmetric(const Eigen::MatrixXd& a);

// Column-major stacking; vec_inverse fills a square matrix column by column.
Eigen::VectorXd vec(const Eigen::MatrixXd& a);
Eigen::MatrixXd vec_inverse(const Eigen::VectorXd& v);

// vech of a symmetric matrix (lower triangle, column-major order).
// Rejects input that fails the symmetry tolerance.
Eigen::VectorXd vech(const Eigen::MatrixXd& a);

// Lower-triangle stacking of an arbitrary square matrix (no symmetry check).
Eigen::VectorXd vech_lower(const Eigen::MatrixXd& a);

// Inverse of vech: rebuilds the symmetric matrix.
Eigen::MatrixXd vech_to_sym(const Eigen::VectorXd& v);

// Duplication matrix D_d (d^2 x d(d+1)/2), elimination matrix L_d
// (d(d+1)/2 x d^2) and the Moore-Penrose inverse D_d^+ = (D_d^T D_d)^{-1} D_d^T.
// Built once per dimension and cached; safe for concurrent use.
const Eigen::MatrixXd& duplication_matrix(int d);
const Eigen::MatrixXd& elimination_matrix(int d);
const Eigen::MatrixXd& dup_mp_inverse(int d);

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Decided by Cholesky success: true iff all pivots are strictly positive.
bool is_positive_definite(const Eigen::MatrixXd& a);

// Lower Cholesky factor of a positive definite matrix; throws otherwise.
Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& a);

}  // namespace vbsl::matcalc
