#pragma once

#include <Eigen/Dense>
#include <string>

#include "kmor/kernels.hpp"
#include "kmor/numerics.hpp"
#include "kmor/systems.hpp"

namespace kmor {

// Excitation-experiment samples. Controllability samples x^j(t_i) come
// from the m impulse runs; observability samples d_j(t_i) collect, for
// output coordinate j at time t_i, the responses of that coordinate to
// each initial condition e_k (so each d_j(t_i) lives in state space).
//
// Linear index order is time-major: all channels at t_1, then t_2, ...
// (sample (i, j) sits at row (i-1)*m + (j-1); same for outputs with p).
struct GramianDataset {
  TimeGrid grid;
  int m = 0;
  int p = 0;
  SamplePanel ctrl;  // (N*m) x n
  SamplePanel obs;   // (N*p) x n

  double ctrl_scale() const { return grid.t_final / (m * static_cast<double>(grid.samples)); }
  double obs_scale() const { return grid.t_final / (p * static_cast<double>(grid.samples)); }
};

GramianDataset collect(const ControlSystem& sys, const TimeGrid& grid);

struct EmpiricalGramianPair {
  Eigen::MatrixXd Wc;  // (T/mN) sum x x^T
  Eigen::MatrixXd Wo;  // (T/pN) sum d d^T
  double scale_c = 0.0;
  double scale_o = 0.0;
};

EmpiricalGramianPair empirical_gramians(const GramianDataset& ds);

// Balancing transform for an empirical Gramian pair:
// Cholesky Wo = Z Z^T (with jitter), eigendecomposition of Z^T Wc Z,
// T chosen so that T Wc T^T = diag(sigma) = T^-T Wo T^-1.
struct LinearBalance {
  Eigen::MatrixXd T;
  Eigen::VectorXd sigma;  // descending Hankel values
};

LinearBalance linear_balance(const EmpiricalGramianPair& g,
                             const ToleranceConfig& tol);

// CSV round trip: one row per sample
// (tag in {ctrl,obs}, time index, channel index, vector entries).
void write_dataset_csv(const GramianDataset& ds, const std::string& path);
GramianDataset read_dataset_csv(const std::string& path);

}  // namespace kmor
