#include "ctk/simd.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace ctk::simd {
namespace {

std::vector<Isa> available_variants() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (isa_available(isa)) out.push_back(isa);
  }
  return out;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

TEST(SimdKernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(isa_available(Isa::kScalar));
  EXPECT_NO_THROW(kernels_for(Isa::kScalar));
  EXPECT_FALSE(isa_name(active_isa()).empty());
}

TEST(SimdKernels, ScalarReferenceValues) {
  const Kernels& k = kernels_for(Isa::kScalar);
  const double a[3] = {1.0, 2.0, 3.0};
  const double b[3] = {4.0, 5.0, 6.0};
  EXPECT_DOUBLE_EQ(k.dot(a, b, 3), 32.0);
  const double* stages[2] = {a, b};
  const double coeffs[2] = {1.0, -1.0};
  double out[3];
  k.lincomb(out, a, 0.5, coeffs, stages, 2, 3);
  EXPECT_DOUBLE_EQ(out[0], -0.5);
  EXPECT_DOUBLE_EQ(out[2], 1.5);
  k.lincomb(out, nullptr, 2.0, coeffs, stages, 1, 3);
  EXPECT_DOUBLE_EQ(out[1], 4.0);
  const double err[2] = {1.0, 1.0};
  const double y[2] = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(k.scaled_rms(err, y, y, 0.5, 1.0, 2), 2.0);
}

TEST(SimdKernels, VariantsMatchScalarReference) {
  const Kernels& ref = kernels_for(Isa::kScalar);
  const auto variants = available_variants();
  if (variants.empty()) GTEST_SKIP() << "no vector variant on this machine";
  std::mt19937_64 rng(3);
  for (Isa isa : variants) {
    const Kernels& k = kernels_for(isa);
    // lengths straddle every vector-width remainder
    for (std::size_t n = 0; n <= 37; ++n) {
      for (std::size_t ns = 1; ns <= 7; ++ns) {
        std::vector<std::vector<double>> stage_data;
        std::vector<const double*> stages;
        for (std::size_t s = 0; s < ns; ++s) stage_data.push_back(random_vector(rng, n));
        for (auto& s : stage_data) stages.push_back(s.data());
        const auto coeffs = random_vector(rng, ns);
        const auto base = random_vector(rng, n);
        std::vector<double> o1(n), o2(n);
        ref.lincomb(o1.data(), base.data(), 0.37, coeffs.data(), stages.data(), ns, n);
        k.lincomb(o2.data(), base.data(), 0.37, coeffs.data(), stages.data(), ns, n);
        for (std::size_t i = 0; i < n; ++i) {
          EXPECT_NEAR(o1[i], o2[i], 1e-13 * (1.0 + std::fabs(o1[i]))) << isa_name(isa);
        }
        // in-place update
        std::vector<double> inplace = base;
        k.lincomb(inplace.data(), inplace.data(), 0.37, coeffs.data(), stages.data(), ns, n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(inplace[i], o1[i], 1e-13 * (1.0 + std::fabs(o1[i])));
      }
      const auto a = random_vector(rng, n), b = random_vector(rng, n), e = random_vector(rng, n);
      const double d1 = ref.dot(a.data(), b.data(), n), d2 = k.dot(a.data(), b.data(), n);
      EXPECT_NEAR(d1, d2, 1e-12 * (1.0 + std::fabs(d1)));
      const double r1 = ref.scaled_rms(e.data(), a.data(), b.data(), 1e-10, 1e-8, n);
      const double r2 = k.scaled_rms(e.data(), a.data(), b.data(), 1e-10, 1e-8, n);
      EXPECT_NEAR(r1, r2, 1e-12 * (1.0 + r1));
    }
  }
}

}  // namespace
}  // namespace ctk::simd
