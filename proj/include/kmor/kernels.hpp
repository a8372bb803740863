#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace kmor {

// Kernel family plus hyperparameters.
//   linear:      K(x,y) = <x,y>
//   polynomial:  K(x,y) = (offset + <x,y>)^degree
//   gaussian:    K(x,y) = exp(-gamma * ||x-y||^2)
struct KernelSpec {
  enum class Family { Linear, Polynomial, Gaussian };

  Family family = Family::Polynomial;
  int degree = 3;
  double offset = 1.0;
  double gamma = 1.0;

  static KernelSpec linear();
  static KernelSpec polynomial(int degree, double offset = 1.0);
  static KernelSpec gaussian(double gamma);

  bool differentiable() const { return true; }
  std::string describe() const;
};

// Sample set stored column-major (rows = samples, cols = dimensions),
// the layout the SIMD panel kernels stream over.
class SamplePanel {
 public:
  SamplePanel() = default;
  explicit SamplePanel(Eigen::MatrixXd samples_by_row);

  Eigen::Index count() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }
  const Eigen::MatrixXd& matrix() const { return data_; }
  const Eigen::VectorXd& row_sqnorms() const { return sqnorms_; }
  Eigen::VectorXd sample(Eigen::Index i) const { return data_.row(i); }

  // out[r] = <row_r, x>
  void dots(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  // out[r] = ||row_r - x||^2
  void sqdists(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;

 private:
  Eigen::MatrixXd data_;     // L x n, column-major
  Eigen::VectorXd sqnorms_;  // per-row squared norms
};

double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Row vector dK(x,y)/dx:
//   linear:      y^T
//   polynomial:  degree * (offset + <x,y>)^(degree-1) * y^T
//   gaussian:    -2 gamma K(x,y) (x - y)^T
Eigen::RowVectorXd kernel_gradient(const KernelSpec& k, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y);

// Pairwise kernel matrix over a sample set. Symmetric by construction
// (entry (i,j) and (j,i) are computed by the identical reduction).
Eigen::MatrixXd gram_matrix(const KernelSpec& k, const SamplePanel& data);

// Cross-kernel matrix, entry (i,j) = K(rows_a[i], rows_b[j]).
Eigen::MatrixXd gram_matrix(const KernelSpec& k, const SamplePanel& a,
                            const SamplePanel& b);

// k_c(x): kernel evaluations of x against a stored, ordered sample set.
class EmpiricalFeatureMap {
 public:
  EmpiricalFeatureMap() = default;
  EmpiricalFeatureMap(KernelSpec kernel, SamplePanel samples);

  const KernelSpec& kernel() const { return kernel_; }
  const SamplePanel& samples() const { return samples_; }
  Eigen::Index size() const { return samples_.count(); }
  Eigen::Index dim() const { return samples_.dim(); }

  // Entry l = K(x, sample_l), in stored order.
  Eigen::VectorXd feature_vector(const Eigen::VectorXd& x) const;

  // L x n Jacobian of the feature vector; row l is
  // kernel_gradient(kernel, x, sample_l).
  Eigen::MatrixXd feature_jacobian(const Eigen::VectorXd& x) const;

 private:
  KernelSpec kernel_;
  SamplePanel samples_;
};

}  // namespace kmor
