#pragma once

#include <Eigen/Dense>
#include <string>

#include "kmor/kernels.hpp"
#include "kmor/numerics.hpp"

namespace kmor {

// Simultaneous diagonalization of the controllability and observability
// kernel matrices. With S = (scaled Kc + jitter I)^{1/2} and the
// eigendecomposition S Ko S = U diag(sigma^2) U^T (truncated at
// numerical rank),
//   T      = diag(sigma)^{1/2} U^T pinv(S)
//   T^-T   = diag(sigma)^{-1/2} U^T S
// give T Kc T^T = T^-T Ko T^-1 = diag(sigma) on full-rank input.
struct KernelBalance {
  Eigen::MatrixXd T;       // r x L
  Eigen::MatrixXd Tinv_t;  // r x L
  Eigen::VectorXd sigma;   // descending, length r = numerical rank
};

// Raw Gram matrices go in; the Gramian scale factors (t_final/(mN),
// t_final/(pN)) are applied here so the linear-kernel route carries the
// same scaling as the empirical Gramians.
KernelBalance kernel_balance(const Eigen::MatrixXd& Kc_raw,
                             const Eigen::MatrixXd& Ko_raw, double scale_c,
                             double scale_o, const ToleranceConfig& tol);

// Ratios sigma_k / sigma_{k+1}, to aid choosing the retained order.
Eigen::VectorXd sigma_gap_ratios(const Eigen::VectorXd& sigma);

// Smallest k with sigma_k / sigma_{k+1} >= threshold; falls back to the
// largest ratio when no gap reaches it.
int auto_gap_order(const Eigen::VectorXd& sigma, double threshold = 10.0);

// Scaling applied to the retained rows of T when building the reduction
// map.
//   InputNormal: rows scaled to unit feature norm (T_q^T Kc_sc T_q = I_q);
//                this is the scaling used by the shipped pipelines.
//   Balanced:    rows keep the diag(sigma)^{1/2} factor from T.
enum class ReductionScaling { InputNormal, Balanced };

// The truncated reduction map Pi(x) = T_q^T k_c(x) together with
// everything needed to evaluate it, its Jacobian, and the metric used
// by the kernel-property Jacobian approximation.
class BalancedReduction {
 public:
  BalancedReduction() = default;
  BalancedReduction(EmpiricalFeatureMap fmap, const KernelBalance& balance,
                    const Eigen::MatrixXd& Kc_raw, int q, double gram_scale,
                    ReductionScaling scaling);

  int order() const { return q_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& sigma_q() const { return sigma_q_; }
  const Eigen::MatrixXd& Tq() const { return Tq_; }  // L x q
  const EmpiricalFeatureMap& fmap() const { return fmap_; }
  double gram_scale() const { return gram_scale_; }
  ReductionScaling scaling() const { return scaling_; }

  // Pi(x) = T_q^T k_c(x)
  Eigen::VectorXd reduce(const Eigen::VectorXd& x) const;

  // q x n Jacobian of Pi at x: T_q^T J_k(x).
  Eigen::MatrixXd jacobian_of_pi(const Eigen::VectorXd& x) const;

  // (T_q^T Kc T_q)^{-1}, with Kc the raw (unscaled) Gram matrix of the
  // stored samples; computed once at construction.
  const Eigen::MatrixXd& metric_matrix() const { return metric_; }

  // Pi evaluated at every stored sample (q x L), i.e. T_q^T Kc.
  const Eigen::MatrixXd& pi_at_samples() const { return pi_samples_; }

  // Relative deviation between T_q^T Kc T_q and T_q^T T_q diag(sigma_q),
  // the two inverse-metric forms suggested by the kernel-property
  // derivation. They agree only when the retained directions are
  // eigenvectors of Kc, so this is reported as a diagnostic.
  double metric_identity_deviation() const { return metric_identity_dev_; }

 private:
  EmpiricalFeatureMap fmap_;
  Eigen::VectorXd sigma_;    // full retained spectrum from the balance
  Eigen::VectorXd sigma_q_;  // leading q values
  Eigen::MatrixXd Tq_;       // L x q
  Eigen::MatrixXd metric_;   // q x q
  Eigen::MatrixXd pi_samples_;  // q x L
  double gram_scale_ = 1.0;
  double metric_identity_dev_ = 0.0;
  int q_ = 0;
  ReductionScaling scaling_ = ReductionScaling::InputNormal;
};

BalancedReduction truncate(const EmpiricalFeatureMap& fmap,
                           const KernelBalance& balance,
                           const Eigen::MatrixXd& Kc_raw, int q,
                           double gram_scale,
                           ReductionScaling scaling = ReductionScaling::InputNormal);

// Reduction bundle on disk: JSON header plus CSV matrix payloads.
void write_reduction_bundle(const BalancedReduction& br,
                            const std::string& json_path);
BalancedReduction read_reduction_bundle(const std::string& json_path);

}  // namespace kmor
