#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kmor/balancing.hpp"
#include "kmor/numerics.hpp"
#include "kmor/rkhs.hpp"
#include "kmor/signals.hpp"
#include "kmor/systems.hpp"

namespace kmor {

// How the Jacobian factor J_k(Pi^{-1}(x_r)) of the closed dynamics is
// approximated.
//
// TaylorInverse: first-order preimage about `expansion_point`; the
// expansion may be refreshed every `refresh_every` integration substeps
// (0 = never) by re-expanding about the current preimage estimate.
//
// KernelProperty: the closed-form rows d * s^((d-1)/d) * y^T with
// s = <x_r, M Pi(y)>, valid for polynomial kernels. Fractional powers
// of negative s use the sign-preserving real d-th root; when
// `clamp_negative` is set, rows with s < 0 are zeroed instead (the
// implicit-preimage identity is unreliable there).
struct JacobianMode {
  enum class Kind { TaylorInverse, KernelProperty };
  Kind kind = Kind::TaylorInverse;
  Eigen::VectorXd expansion_point;  // Taylor mode; defaults to x0 = 0
  int refresh_every = 0;
  bool clamp_negative = false;
};

// First-order least-norm preimage about a:
//   pre(x_r) = pinv(J_Pi(a)) (x_r - Pi(a)) + a.
Eigen::VectorXd taylor_preimage(const BalancedReduction& br,
                                const Eigen::VectorXd& a,
                                const Eigen::VectorXd& x_r,
                                const ToleranceConfig& tol);

// Row weights w with J_k(Pi^{-1}(x_r)) row l = w(l) * sample_l^T, from
// the polynomial-kernel derivative identity. Throws for non-polynomial
// kernels.
Eigen::VectorXd kernel_property_weights(const BalancedReduction& br,
                                        const Eigen::VectorXd& x_r,
                                        bool clamp_negative);

// q x n Jacobian approximation T_q^T J_k(Pi^{-1}(x_r)) in kernel-property
// mode.
Eigen::MatrixXd kernel_property_jacobian(const BalancedReduction& br,
                                         const Eigen::VectorXd& x_r,
                                         bool clamp_negative);

// Closed reduced-order system
//   xdot_r = T_q^T J_k(Pi^{-1}(x_r)) C^T k^f(x_r, u),  y = hhat(x_r).
struct ReducedSystem {
  BalancedReduction br;
  RKHSModel fhat;  // targets in R^n, inputs (x_r, u) [+ bias]
  RKHSModel hhat;  // targets in R^p, inputs x_r [+ bias]
  JacobianMode jmode;
  ToleranceConfig tol;
};

// Evaluator holding the cached Taylor expansion state; refreshed by the
// simulation loop per the mode's policy.
class ClosedDynamics {
 public:
  explicit ClosedDynamics(const ReducedSystem& rs);

  Eigen::VectorXd rhs(const Eigen::VectorXd& x_r, const Eigen::VectorXd& u) const;

  // Re-expand about the preimage estimate of x_r (Taylor mode only).
  void refresh(const Eigen::VectorXd& x_r);

  const Eigen::VectorXd& expansion_point() const { return a_; }

 private:
  const ReducedSystem& rs_;
  Eigen::VectorXd a_;        // expansion point
  Eigen::VectorXd pi_a_;     // Pi(a)
  Eigen::MatrixXd j_a_pinv;  // pinv(J_Pi(a))
};

Eigen::VectorXd closed_rhs(const ReducedSystem& rs, const Eigen::VectorXd& x_r,
                           const Eigen::VectorXd& u);

struct ReducedTrajectory {
  TimeGrid grid;
  Eigen::VectorXd times;    // N
  Eigen::MatrixXd states;   // q x N
  Eigen::MatrixXd inputs;   // m x N
  Eigen::MatrixXd outputs;  // p x N (hhat along the trajectory)
};

ReducedTrajectory simulate_reduced(const ReducedSystem& rs,
                                   const Eigen::VectorXd& x_r0,
                                   const std::vector<Signal>& u,
                                   const TimeGrid& grid);

struct ComparisonMetrics {
  double rmse = 0.0;
  double relative_l2 = 0.0;
  double max_abs_err = 0.0;
};

// Both trajectories sampled on the same grid; p x N output matrices.
ComparisonMetrics compare(const Eigen::MatrixXd& y,
                          const Eigen::MatrixXd& y_hat);

}  // namespace kmor
