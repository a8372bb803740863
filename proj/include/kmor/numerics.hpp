#pragma once

#include <Eigen/Dense>

namespace kmor {

// Tolerance policy shared by every dense decomposition in the toolkit.
// All cutoffs flow from here; nothing else hard-codes a threshold.
struct ToleranceConfig {
  double pinv_rtol = 1e-10;  // relative singular-value cutoff
  double psd_clip = 0.0;     // eigenvalue floor for PSD square roots
  double jitter = 1e-3;      // diagonal regularizer before Cholesky / sqrt
};

// Symmetric square root via eigendecomposition. Eigenvalues below
// psd_clip are clipped before taking the root. Throws NumericError if A
// is not symmetric to 1e-8 * ||A||.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A, const ToleranceConfig& tol);

// Square root together with its pseudoinverse from a single
// eigendecomposition, so both sides share one rank cutoff
// (eigenvalues <= pinv_rtol * max are treated as zero).
struct PsdSqrtPair {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd pinv_sqrt;
};
PsdSqrtPair psd_sqrt_with_pinv(const Eigen::MatrixXd& A,
                               const ToleranceConfig& tol);

// SVD-based Moore-Penrose pseudoinverse; singular values below
// pinv_rtol * sigma_max are treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, const ToleranceConfig& tol);

// Lower-triangular L with L L^T = A + jitter * I. Throws NumericError
// reporting the smallest eigenvalue if the factorization fails.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& A,
                                  const ToleranceConfig& tol);

struct ReducedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;  // descending
  Eigen::MatrixXd V;
};
ReducedSvd reduced_svd(const Eigen::MatrixXd& A);

// Eigendecomposition of a symmetric matrix, eigenvalues descending.
struct SymEig {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
SymEig sym_eig_descending(const Eigen::MatrixXd& A);

}  // namespace kmor
