#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel kernels behind the integrator's inner loops. Each kernel has a
// scalar reference implementation and optional AVX2/NEON variants; the
// variant is picked once at runtime from the CPU features (override with the
// environment variable CTK_SIMD=scalar|avx2|neon).
namespace ctk::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct Kernels {
  // out[i] = base[i] + h * sum_j coeffs[j] * stages[j][i]; base may be null
  // (treated as zero). out may alias base.
  void (*lincomb)(double* out, const double* base, double h, const double* coeffs,
                  const double* const* stages, std::size_t nstages, std::size_t n);
  // sqrt(mean_i (err_i / (atol + rtol * max(|a_i|, |b_i|)))^2)
  double (*scaled_rms)(const double* err, const double* a, const double* b, double atol,
                       double rtol, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const Kernels& kernels();
Isa active_isa();

bool isa_available(Isa isa);
// Throws std::invalid_argument when the variant is not built or the CPU lacks
// the instructions.
const Kernels& kernels_for(Isa isa);
std::string_view isa_name(Isa isa);

namespace detail {
const Kernels& scalar_kernels();
#if defined(CTK_BUILD_AVX2)
const Kernels& avx2_kernels();
#endif
#if defined(CTK_BUILD_NEON)
const Kernels& neon_kernels();
#endif
}  // namespace detail

}  // namespace ctk::simd
