#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kmor/kernels.hpp"

namespace kmor {

// Training set for kernel regularized least squares. Inputs are stored
// one example per column; when bias_augmented is set a constant-1
// coordinate is appended to every input.
struct RegressionDataset {
  Eigen::MatrixXd inputs;   // d x l (after augmentation)
  Eigen::MatrixXd targets;  // r x l (one row per target coordinate)
  bool bias_augmented = false;
};

RegressionDataset make_regression_dataset(const Eigen::MatrixXd& inputs,
                                          const Eigen::MatrixXd& targets,
                                          bool bias_augment);

// Kernel expansion model: prediction coordinate i at z is
// sum_j coeffs(i,j) K(z, z_j).
struct RKHSModel {
  KernelSpec kernel;
  SamplePanel train_inputs;  // l x d
  Eigen::MatrixXd coeffs;    // r x l
  double lambda = 0.0;
  bool bias_augmented = false;

  Eigen::Index input_dim() const { return train_inputs.dim(); }

  // z is the un-augmented input; the bias coordinate is appended here
  // when the model was trained with one.
  Eigen::VectorXd predict(const Eigen::VectorXd& z) const;

  // Feature vector k^f(z) against the training inputs (post-augmentation).
  Eigen::VectorXd feature_vector(const Eigen::VectorXd& z) const;
};

// Shared eigendecomposition of the training Gram matrix; one
// factorization serves every lambda on the grid and every target
// coordinate.
class RlsSolver {
 public:
  RlsSolver(const RegressionDataset& ds, const KernelSpec& kernel);

  RKHSModel fit(double lambda) const;

  // Mean squared leave-one-out residual per target coordinate, via the
  // closed form r_j = c_j / H_jj with H = (G + lambda I)^{-1}, c = H y.
  Eigen::VectorXd loocv_mse(double lambda) const;

  const Eigen::MatrixXd& gram() const { return gram_; }

 private:
  RegressionDataset ds_;
  KernelSpec kernel_;
  Eigen::MatrixXd gram_;       // l x l
  Eigen::VectorXd eigvals_;    // ascending, clipped at 0
  Eigen::MatrixXd eigvecs_;
  Eigen::MatrixXd projected_;  // Q^T y per coordinate (l x r)
};

RKHSModel rls_fit(const RegressionDataset& ds, const KernelSpec& kernel,
                  double lambda);

Eigen::VectorXd loocv_error(const RegressionDataset& ds,
                            const KernelSpec& kernel, double lambda);

// Lambda minimizing the summed LOOCV error; ties break toward the
// larger lambda.
double select_lambda(const RegressionDataset& ds, const KernelSpec& kernel,
                     const std::vector<double>& grid,
                     std::vector<double>* errors_out = nullptr);

// 1 / (mean pairwise Euclidean distance) over the columns of `inputs`.
double gamma_heuristic(const Eigen::MatrixXd& inputs);

// Model bundle on disk: JSON header plus CSV payloads.
void write_model_bundle(const RKHSModel& model, const std::string& json_path);
RKHSModel read_model_bundle(const std::string& json_path);

}  // namespace kmor
