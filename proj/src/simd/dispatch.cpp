#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ctk/simd.hpp"

namespace ctk::simd {

namespace {

bool cpu_has_avx2() {
#if defined(CTK_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("CTK_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
    if (want == "neon" && isa_available(Isa::kNeon)) return Isa::kNeon;
  }
  if (isa_available(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_available(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2: return cpu_has_avx2();
    case Isa::kNeon:
#if defined(CTK_BUILD_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels_for(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(CTK_BUILD_AVX2)
    case Isa::kAvx2: return detail::avx2_kernels();
#endif
#if defined(CTK_BUILD_NEON)
    case Isa::kNeon: return detail::neon_kernels();
#endif
    default: return detail::scalar_kernels();
  }
}

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

const Kernels& kernels() {
  static const Kernels& k = kernels_for(active_isa());
  return k;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

}  // namespace ctk::simd
