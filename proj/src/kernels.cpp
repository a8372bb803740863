#include "kmor/kernels.hpp"

#include <cmath>
#include <sstream>

#include "kmor/errors.hpp"
#include "kmor/simd/simd_ops.hpp"

namespace kmor {

namespace {

void require_dim(Eigen::Index a, Eigen::Index b, const char* who) {
  if (a != b) {
    std::ostringstream msg;
    msg << who << ": dimension mismatch (" << a << " vs " << b << ")";
    throw NumericError(msg.str());
  }
}

}  // namespace

KernelSpec KernelSpec::linear() {
  KernelSpec k;
  k.family = Family::Linear;
  return k;
}

KernelSpec KernelSpec::polynomial(int degree, double offset) {
  if (degree < 1) throw ConfigError("polynomial kernel: degree must be >= 1");
  if (offset < 0.0) throw ConfigError("polynomial kernel: offset must be >= 0");
  KernelSpec k;
  k.family = Family::Polynomial;
  k.degree = degree;
  k.offset = offset;
  return k;
}

KernelSpec KernelSpec::gaussian(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gaussian kernel: gamma must be > 0");
  KernelSpec k;
  k.family = Family::Gaussian;
  k.gamma = gamma;
  return k;
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (family) {
    case Family::Linear:
      os << "linear";
      break;
    case Family::Polynomial:
      os << "polynomial(degree=" << degree << ", offset=" << offset << ")";
      break;
    case Family::Gaussian:
      os << "gaussian(gamma=" << gamma << ")";
      break;
  }
  return os.str();
}

SamplePanel::SamplePanel(Eigen::MatrixXd samples_by_row)
    : data_(std::move(samples_by_row)) {
  sqnorms_ = data_.rowwise().squaredNorm();
}

void SamplePanel::dots(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  require_dim(x.size(), data_.cols(), "SamplePanel::dots");
  out.resize(data_.rows());
  simd::active().panel_dots(data_.data(),
                            static_cast<std::size_t>(data_.rows()),
                            static_cast<std::size_t>(data_.cols()),
                            static_cast<std::size_t>(data_.rows()), x.data(),
                            out.data());
}

void SamplePanel::sqdists(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  dots(x, out);
  const double xs = simd::active().dot(x.data(), x.data(),
                                       static_cast<std::size_t>(x.size()));
  simd::active().sqdist_from_dots(out.data(), sqnorms_.data(), xs,
                                  static_cast<std::size_t>(out.size()),
                                  out.data());
}

double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  require_dim(x.size(), y.size(), "eval_kernel");
  const auto& ops = simd::active();
  const std::size_t n = static_cast<std::size_t>(x.size());
  switch (k.family) {
    case KernelSpec::Family::Linear:
      return ops.dot(x.data(), y.data(), n);
    case KernelSpec::Family::Polynomial: {
      double v = ops.dot(x.data(), y.data(), n);
      ops.poly_eval(&v, 1, k.offset, k.degree);
      return v;
    }
    case KernelSpec::Family::Gaussian: {
      double v = ops.sqdist(x.data(), y.data(), n);
      ops.exp_scale(&v, 1, -k.gamma);
      return v;
    }
  }
  throw NumericError("eval_kernel: unknown family");
}

Eigen::RowVectorXd kernel_gradient(const KernelSpec& k, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y) {
  require_dim(x.size(), y.size(), "kernel_gradient");
  switch (k.family) {
    case KernelSpec::Family::Linear:
      return y.transpose();
    case KernelSpec::Family::Polynomial: {
      const double base = k.offset + x.dot(y);
      double coef = static_cast<double>(k.degree);
      for (int d = 0; d + 1 < k.degree; ++d) coef *= base;
      return coef * y.transpose();
    }
    case KernelSpec::Family::Gaussian: {
      const double kv = std::exp(-k.gamma * (x - y).squaredNorm());
      return (-2.0 * k.gamma * kv) * (x - y).transpose();
    }
  }
  throw NumericError("kernel_gradient: unknown family");
}

namespace {

// Shared by both gram_matrix overloads: fills one column of K with the
// kernel evaluations of `x` against `panel`.
void kernel_column(const KernelSpec& k, const SamplePanel& panel,
                   const Eigen::VectorXd& x, double* out) {
  const auto& ops = simd::active();
  const std::size_t rows = static_cast<std::size_t>(panel.count());
  ops.panel_dots(panel.matrix().data(), rows,
                 static_cast<std::size_t>(panel.dim()), rows, x.data(), out);
  switch (k.family) {
    case KernelSpec::Family::Linear:
      break;
    case KernelSpec::Family::Polynomial:
      ops.poly_eval(out, rows, k.offset, k.degree);
      break;
    case KernelSpec::Family::Gaussian: {
      const double xs =
          ops.dot(x.data(), x.data(), static_cast<std::size_t>(x.size()));
      ops.sqdist_from_dots(out, panel.row_sqnorms().data(), xs, rows, out);
      ops.exp_scale(out, rows, -k.gamma);
      break;
    }
  }
}

}  // namespace

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const SamplePanel& data) {
  if (data.count() == 0) throw NumericError("gram_matrix: empty sample set");
  const Eigen::Index L = data.count();
  Eigen::MatrixXd K(L, L);
  Eigen::VectorXd x;
  for (Eigen::Index j = 0; j < L; ++j) {
    x = data.sample(j);
    kernel_column(k, data, x, K.col(j).data());
  }
  return K;
}

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const SamplePanel& a,
                            const SamplePanel& b) {
  require_dim(a.dim(), b.dim(), "gram_matrix");
  Eigen::MatrixXd K(a.count(), b.count());
  Eigen::VectorXd x;
  for (Eigen::Index j = 0; j < b.count(); ++j) {
    x = b.sample(j);
    kernel_column(k, a, x, K.col(j).data());
  }
  return K;
}

EmpiricalFeatureMap::EmpiricalFeatureMap(KernelSpec kernel, SamplePanel samples)
    : kernel_(kernel), samples_(std::move(samples)) {}

Eigen::VectorXd EmpiricalFeatureMap::feature_vector(
    const Eigen::VectorXd& x) const {
  require_dim(x.size(), samples_.dim(), "feature_vector");
  Eigen::VectorXd out(samples_.count());
  kernel_column(kernel_, samples_, x, out.data());
  return out;
}

Eigen::MatrixXd EmpiricalFeatureMap::feature_jacobian(
    const Eigen::VectorXd& x) const {
  require_dim(x.size(), samples_.dim(), "feature_jacobian");
  const auto& ops = simd::active();
  const Eigen::Index L = samples_.count();
  const std::size_t rows = static_cast<std::size_t>(L);
  switch (kernel_.family) {
    case KernelSpec::Family::Linear:
      return samples_.matrix();
    case KernelSpec::Family::Polynomial: {
      Eigen::VectorXd coef(L);
      samples_.dots(x, coef);
      ops.poly_deriv_coef(coef.data(), rows, kernel_.offset, kernel_.degree);
      return coef.asDiagonal() * samples_.matrix();
    }
    case KernelSpec::Family::Gaussian: {
      Eigen::VectorXd kv(L);
      samples_.sqdists(x, kv);
      ops.exp_scale(kv.data(), rows, -kernel_.gamma);
      kv *= -2.0 * kernel_.gamma;
      Eigen::MatrixXd diff = (-samples_.matrix()).rowwise() + x.transpose();
      return kv.asDiagonal() * diff;
    }
  }
  throw NumericError("feature_jacobian: unknown family");
}

}  // namespace kmor
