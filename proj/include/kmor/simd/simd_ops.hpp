#pragma once

#include <cstddef>

// Data-parallel inner loops used by the kernel-evaluation layer.
//
// Every operation has a scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The active table is picked once at startup from
// CPU capabilities; the KMOR_SIMD environment variable ("scalar" or
// "avx2") overrides the choice. Variants are equivalence-tested against
// the scalar reference to a small relative tolerance (summation order
// and FMA contraction differ between variants).
//
// Panels are column-major: `rows` samples by `cols` dimensions with
// leading dimension `ld >= rows`, so entry (r, c) sits at panel[r + c*ld].
// This matches Eigen's default layout and lets every op stream down
// contiguous columns.

namespace kmor::simd {

struct OpsTable {
  // sum_k a[k]*b[k]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_k (a[k]-b[k])^2
  double (*sqdist)(const double* a, const double* b, std::size_t n);
  // y[k] += alpha * x[k]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[r] = sum_c panel(r,c) * x[c]   (row-wise dots against a vector)
  void (*panel_dots)(const double* panel, std::size_t rows, std::size_t cols,
                     std::size_t ld, const double* x, double* out);
  // out[r] = row_sqnorms[r] - 2*dots[r] + x_sqnorm, clamped at 0
  void (*sqdist_from_dots)(const double* dots, const double* row_sqnorms,
                           double x_sqnorm, std::size_t rows, double* out);
  // v[k] = (offset + v[k])^degree, degree >= 0
  void (*poly_eval)(double* v, std::size_t n, double offset, int degree);
  // v[k] = degree * (offset + v[k])^(degree-1)
  void (*poly_deriv_coef)(double* v, std::size_t n, double offset, int degree);
  // v[k] = exp(scale * v[k])
  void (*exp_scale)(double* v, std::size_t n, double scale);
  const char* name;
};

// Scalar reference kernels. Always available.
const OpsTable& scalar_table();

// AVX2+FMA kernels, or nullptr when the build or the CPU lacks support.
const OpsTable* avx2_table();

// Table selected at startup (CPU detection + KMOR_SIMD override).
const OpsTable& active();

}  // namespace kmor::simd
