// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "ctk/simd.hpp"

namespace ctk::simd::detail {

namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void lincomb(double* out, const double* base, double h, const double* coeffs,
             const double* const* stages, std::size_t nstages, std::size_t n) {
  const __m256d vh = _mm256_set1_pd(h);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < nstages; ++j) {
      acc = _mm256_fmadd_pd(_mm256_set1_pd(coeffs[j]), _mm256_loadu_pd(stages[j] + i), acc);
    }
    const __m256d b = base != nullptr ? _mm256_loadu_pd(base + i) : _mm256_setzero_pd();
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vh, acc, b));
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nstages; ++j) acc = std::fma(coeffs[j], stages[j][i], acc);
    out[i] = std::fma(h, acc, base != nullptr ? base[i] : 0.0);
  }
}

double scaled_rms(const double* err, const double* a, const double* b, double atol, double rtol,
                  std::size_t n) {
  if (n == 0) return 0.0;
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d va = _mm256_set1_pd(atol);
  const __m256d vr = _mm256_set1_pd(rtol);
  __m256d sum = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d aa = _mm256_andnot_pd(sign, _mm256_loadu_pd(a + i));
    const __m256d bb = _mm256_andnot_pd(sign, _mm256_loadu_pd(b + i));
    const __m256d sc = _mm256_fmadd_pd(vr, _mm256_max_pd(aa, bb), va);
    const __m256d r = _mm256_div_pd(_mm256_loadu_pd(err + i), sc);
    sum = _mm256_fmadd_pd(r, r, sum);
  }
  double total = hsum(sum);
  for (; i < n; ++i) {
    const double sc = std::fma(rtol, std::max(std::fabs(a[i]), std::fabs(b[i])), atol);
    const double r = err[i] / sc;
    total = std::fma(r, r, total);
  }
  return std::sqrt(total / static_cast<double>(n));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d sum = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    sum = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), sum);
  }
  double total = hsum(sum);
  for (; i < n; ++i) total = std::fma(a[i], b[i], total);
  return total;
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k{&lincomb, &scaled_rms, &dot};
  return k;
}

}  // namespace ctk::simd::detail
