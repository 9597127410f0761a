#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "ctk/simd.hpp"

namespace ctk::simd::detail {

namespace {

void lincomb(double* out, const double* base, double h, const double* coeffs,
             const double* const* stages, std::size_t nstages, std::size_t n) {
  const float64x2_t vh = vdupq_n_f64(h);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < nstages; ++j) {
      acc = vfmaq_f64(acc, vdupq_n_f64(coeffs[j]), vld1q_f64(stages[j] + i));
    }
    const float64x2_t b = base != nullptr ? vld1q_f64(base + i) : vdupq_n_f64(0.0);
    vst1q_f64(out + i, vfmaq_f64(b, vh, acc));
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
  const float64x2_t va = vdupq_n_f64(atol);
  const float64x2_t vr = vdupq_n_f64(rtol);
  float64x2_t sum = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t m = vmaxq_f64(vabsq_f64(vld1q_f64(a + i)), vabsq_f64(vld1q_f64(b + i)));
    const float64x2_t sc = vfmaq_f64(va, vr, m);
    const float64x2_t r = vdivq_f64(vld1q_f64(err + i), sc);
    sum = vfmaq_f64(sum, r, r);
  }
  double total = vaddvq_f64(sum);
  for (; i < n; ++i) {
    const double sc = std::fma(rtol, std::max(std::fabs(a[i]), std::fabs(b[i])), atol);
    const double r = err[i] / sc;
    total = std::fma(r, r, total);
  }
  return std::sqrt(total / static_cast<double>(n));
}

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t sum = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) sum = vfmaq_f64(sum, vld1q_f64(a + i), vld1q_f64(b + i));
  double total = vaddvq_f64(sum);
  for (; i < n; ++i) total = std::fma(a[i], b[i], total);
  return total;
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k{&lincomb, &scaled_rms, &dot};
  return k;
}

}  // namespace ctk::simd::detail
