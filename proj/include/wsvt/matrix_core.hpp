#pragma once

// Dense matrices, the SVD, and the singular-value thresholding operators
// every solver in this library is built from.
//
// Storage is Eigen's default column-major layout throughout; CSV files are
// written and read one matrix row per line.

#include <filesystem>

#include <Eigen/Dense>

namespace wsvt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD M = U * diag(sigma) * V^T with k = min(rows, cols).
/// sigma is nonnegative and sorted in descending order. Singular vectors
/// are only defined up to sign (and rotation inside repeated singular
/// values), so callers should consume products and norms, not columns.
struct SvdFactors {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const;
};

/// Throws InvalidArgument for empty input, DegenerateInput for non-finite
/// entries and Numerical if the decomposition does not converge.
SvdFactors svd(const Matrix& m);

bool all_finite(const Matrix& m);

/// sign(x) * max(|x| - tau, 0).
double soft_threshold(double x, double tau);

/// Proximal map of tau * nuclear norm: U * S_tau(Sigma) * V^T.
Matrix svt_shrink(const Matrix& m, double tau);
/// Same operator on an existing factorization.
Matrix svt_shrink(const SvdFactors& f, double tau);

/// Best rank-r approximation in Frobenius norm (keeps the r largest singular values).
Matrix hard_threshold_rank(const Matrix& m, Eigen::Index r);

double spectral_norm(const Matrix& m);
double nuclear_norm(const Matrix& m);
double frobenius_norm(const Matrix& m);

/// Number of singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const Matrix& m, double rel_tol = 1e-10);

/// Writes one row per line using the shortest round-trip decimal form, '.' as decimal
/// separator and no header. The file is replaced atomically.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace wsvt
