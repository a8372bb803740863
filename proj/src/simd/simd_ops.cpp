#include "kmor/simd/simd_ops.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace kmor::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void panel_dots_scalar(const double* panel, std::size_t rows, std::size_t cols,
                       std::size_t ld, const double* x, double* out) {
  std::memset(out, 0, rows * sizeof(double));
  for (std::size_t c = 0; c < cols; ++c) {
    const double* col = panel + c * ld;
    const double xc = x[c];
    for (std::size_t r = 0; r < rows; ++r) out[r] += xc * col[r];
  }
}

void sqdist_from_dots_scalar(const double* dots, const double* row_sqnorms,
                             double x_sqnorm, std::size_t rows, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = row_sqnorms[r] - 2.0 * dots[r] + x_sqnorm;
    out[r] = v > 0.0 ? v : 0.0;
  }
}

void poly_eval_scalar(double* v, std::size_t n, double offset, int degree) {
  for (std::size_t k = 0; k < n; ++k) {
    const double base = offset + v[k];
    double acc = 1.0;
    for (int d = 0; d < degree; ++d) acc *= base;
    v[k] = acc;
  }
}

void poly_deriv_coef_scalar(double* v, std::size_t n, double offset, int degree) {
  for (std::size_t k = 0; k < n; ++k) {
    const double base = offset + v[k];
    double acc = 1.0;
    for (int d = 0; d + 1 < degree; ++d) acc *= base;
    v[k] = static_cast<double>(degree) * acc;
  }
}

void exp_scale_scalar(double* v, std::size_t n, double scale) {
  for (std::size_t k = 0; k < n; ++k) v[k] = std::exp(scale * v[k]);
}

const OpsTable kScalar = {
    dot_scalar,       sqdist_scalar,          axpy_scalar,
    panel_dots_scalar, sqdist_from_dots_scalar, poly_eval_scalar,
    poly_deriv_coef_scalar, exp_scale_scalar,  "scalar",
};

const OpsTable* pick_table() {
  const char* env = std::getenv("KMOR_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return &kScalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_table() != nullptr)
      return avx2_table();
    return &kScalar;
  }
  if (const OpsTable* t = avx2_table()) return t;
  return &kScalar;
}

}  // namespace

const OpsTable& scalar_table() { return kScalar; }

const OpsTable& active() {
  static const OpsTable* table = pick_table();
  return *table;
}

}  // namespace kmor::simd
