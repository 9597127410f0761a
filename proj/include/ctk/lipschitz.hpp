#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctk/ode.hpp"
#include "ctk/system.hpp"

namespace ctk {

struct LipschitzEstimate {
  double value = 0.0;
  // Set for state-dependent metrics, where only a sampled pairwise-growth
  // estimate is available.
  bool heuristic = false;
  std::size_t samples = 0;
};

// Estimates L with |f(p) - f(q)| <= L d(p, q) over the system's domain and the
// given times. For flat metrics this is max ||P^{1/2} J P^{-1/2}||_2 over box
// corners, the center and `sample_count` random states.
LipschitzEstimate lipschitz_estimate(const SystemDef& sys, std::span<const double> t_grid,
                                     int sample_count, std::uint64_t seed);

struct FlowDistanceViolation {
  std::size_t pair = 0;
  double t = 0.0;
  double distance = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FlowDistanceReport {
  std::size_t pairs = 0;
  std::vector<FlowDistanceViolation> violations;
};

// Checks d0 e^{-L s} <= d(phi(t0+s; t0, x1), phi(t0+s; t0, x2)) <= d0 e^{L s}
// for random pairs in the domain on a uniform grid over [t0, t0 + horizon].
FlowDistanceReport flow_distance_check(const SystemDef& sys, double L, int pairs, double t0,
                                       double horizon, int grid_points, std::uint64_t seed,
                                       const IntegratorConfig& cfg = {}, double tol = 1e-6);

}  // namespace ctk
