// AVX2+FMA variants. This translation unit is compiled with
// -mavx2 -mfma; the table is only handed out after a runtime
// CPU-capability check, so linking it into a generic binary is safe.

#include "kmor/simd/simd_ops.hpp"

#if defined(KMOR_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace kmor::simd {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc);
  }
  double sum = hsum(acc);
  for (; k < n; ++k) sum += a[k] * b[k];
  return sum;
}

double sqdist_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double sum = hsum(acc);
  for (; k < n; ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d r =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k));
    _mm256_storeu_pd(y + k, r);
  }
  for (; k < n; ++k) y[k] += alpha * x[k];
}

// Accumulates column by column so the result only depends on the column
// order, matching the scalar reference up to FMA rounding.
void panel_dots_avx2(const double* panel, std::size_t rows, std::size_t cols,
                     std::size_t ld, const double* x, double* out) {
  std::memset(out, 0, rows * sizeof(double));
  for (std::size_t c = 0; c < cols; ++c) {
    const double* col = panel + c * ld;
    const __m256d xc = _mm256_set1_pd(x[c]);
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
      const __m256d acc =
          _mm256_fmadd_pd(xc, _mm256_loadu_pd(col + r), _mm256_loadu_pd(out + r));
      _mm256_storeu_pd(out + r, acc);
    }
    for (; r < rows; ++r) out[r] += x[c] * col[r];
  }
}

void sqdist_from_dots_avx2(const double* dots, const double* row_sqnorms,
                           double x_sqnorm, std::size_t rows, double* out) {
  const __m256d xs = _mm256_set1_pd(x_sqnorm);
  const __m256d m2 = _mm256_set1_pd(-2.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    __m256d v = _mm256_add_pd(_mm256_loadu_pd(row_sqnorms + r), xs);
    v = _mm256_fmadd_pd(m2, _mm256_loadu_pd(dots + r), v);
    _mm256_storeu_pd(out + r, _mm256_max_pd(v, zero));
  }
  for (; r < rows; ++r) {
    const double v = row_sqnorms[r] - 2.0 * dots[r] + x_sqnorm;
    out[r] = v > 0.0 ? v : 0.0;
  }
}

void poly_eval_avx2(double* v, std::size_t n, double offset, int degree) {
  const __m256d off = _mm256_set1_pd(offset);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d base = _mm256_add_pd(off, _mm256_loadu_pd(v + k));
    __m256d acc = _mm256_set1_pd(1.0);
    for (int d = 0; d < degree; ++d) acc = _mm256_mul_pd(acc, base);
    _mm256_storeu_pd(v + k, acc);
  }
  for (; k < n; ++k) {
    const double base = offset + v[k];
    double acc = 1.0;
    for (int d = 0; d < degree; ++d) acc *= base;
    v[k] = acc;
  }
}

void poly_deriv_coef_avx2(double* v, std::size_t n, double offset, int degree) {
  const __m256d off = _mm256_set1_pd(offset);
  const __m256d deg = _mm256_set1_pd(static_cast<double>(degree));
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d base = _mm256_add_pd(off, _mm256_loadu_pd(v + k));
    __m256d acc = _mm256_set1_pd(1.0);
    for (int d = 0; d + 1 < degree; ++d) acc = _mm256_mul_pd(acc, base);
    _mm256_storeu_pd(v + k, _mm256_mul_pd(deg, acc));
  }
  for (; k < n; ++k) {
    const double base = offset + v[k];
    double acc = 1.0;
    for (int d = 0; d + 1 < degree; ++d) acc *= base;
    v[k] = static_cast<double>(degree) * acc;
  }
}

// exp() itself stays scalar; only the scaling is vectorized. The
// Gaussian path spends its time in sqdist, not here.
void exp_scale_avx2(double* v, std::size_t n, double scale) {
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(v + k, _mm256_mul_pd(s, _mm256_loadu_pd(v + k)));
  }
  for (; k < n; ++k) v[k] = scale * v[k];
  for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(v[i]);
}

const OpsTable kAvx2 = {
    dot_avx2,       sqdist_avx2,          axpy_avx2,
    panel_dots_avx2, sqdist_from_dots_avx2, poly_eval_avx2,
    poly_deriv_coef_avx2, exp_scale_avx2,  "avx2",
};

bool cpu_supports_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace

const OpsTable* avx2_table() {
  static const OpsTable* table = cpu_supports_avx2_fma() ? &kAvx2 : nullptr;
  return table;
}

}  // namespace kmor::simd

#else

namespace kmor::simd {
const OpsTable* avx2_table() { return nullptr; }
}  // namespace kmor::simd

#endif
