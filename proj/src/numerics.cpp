#include "kmor/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kmor/errors.hpp"

namespace kmor {

namespace {

void require_symmetric(const Eigen::MatrixXd& A, const char* who) {
  if (A.rows() != A.cols()) {
    throw NumericError(std::string(who) + ": matrix must be square");
  }
  const double scale = std::max(A.norm(), 1.0);
  const double asym = (A - A.transpose()).norm();
  if (asym > 1e-8 * scale) {
    std::ostringstream msg;
    msg << who << ": matrix not symmetric (asymmetry " << asym << ")";
    throw NumericError(msg.str());
  }
}

}  // namespace

SymEig sym_eig_descending(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) {
    throw NumericError("sym_eig: eigendecomposition failed");
  }
  const Eigen::Index n = A.rows();
  SymEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A, const ToleranceConfig& tol) {
  require_symmetric(A, "psd_sqrt");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) {
    throw NumericError("psd_sqrt: eigendecomposition failed");
  }
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(tol.psd_clip).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

PsdSqrtPair psd_sqrt_with_pinv(const Eigen::MatrixXd& A,
                               const ToleranceConfig& tol) {
  require_symmetric(A, "psd_sqrt_with_pinv");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) {
    throw NumericError("psd_sqrt_with_pinv: eigendecomposition failed");
  }
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(tol.psd_clip);
  const double cutoff = tol.pinv_rtol * clipped.maxCoeff();
  Eigen::VectorXd sq = clipped.cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd inv_sq(sq.size());
  for (Eigen::Index i = 0; i < sq.size(); ++i) {
    inv_sq(i) = clipped(i) > cutoff ? 1.0 / sq(i) : 0.0;
  }
  const Eigen::MatrixXd& Q = es.eigenvectors();
  PsdSqrtPair out;
  out.sqrt = Q * sq.asDiagonal() * Q.transpose();
  out.pinv_sqrt = Q * inv_sq.asDiagonal() * Q.transpose();
  return out;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, const ToleranceConfig& tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0) return Eigen::MatrixXd::Zero(A.cols(), A.rows());
  const double cutoff = tol.pinv_rtol * s(0);
  Eigen::VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    inv(i) = s(i) > cutoff ? 1.0 / s(i) : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& A,
                                  const ToleranceConfig& tol) {
  require_symmetric(A, "jittered_cholesky");
  Eigen::MatrixXd shifted =
      A + tol.jitter * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shifted);
    std::ostringstream msg;
    msg << "jittered_cholesky: matrix not positive definite even with jitter "
        << tol.jitter << " (smallest eigenvalue "
        << (es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                        : std::nan(""))
        << ")";
    throw NumericError(msg.str());
  }
  return llt.matrixL();
}

ReducedSvd reduced_svd(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace kmor
