#include <algorithm>
#include <cmath>

#include "ctk/simd.hpp"

namespace ctk::simd::detail {

namespace {

void lincomb(double* out, const double* base, double h, const double* coeffs,
             const double* const* stages, std::size_t nstages, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nstages; ++j) acc += coeffs[j] * stages[j][i];
    out[i] = (base != nullptr ? base[i] : 0.0) + h * acc;
  }
}

double scaled_rms(const double* err, const double* a, const double* b, double atol, double rtol,
                  std::size_t n) {
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
    const double r = err[i] / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{&lincomb, &scaled_rms, &dot};
  return k;
}

}  // namespace ctk::simd::detail
