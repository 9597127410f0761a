#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "ctk/metric.hpp"
#include "ctk/system.hpp"

namespace ctk {

// Where and how densely a sampled check probes the system.
struct SamplePlan {
  std::uint64_t seed = 1;
  int states = 200;
  int tangents = 1;  // tangent directions per state
  int times = 3;     // sample times per state within the window
  double t0 = 0.0;
  double horizon = 5.0;
  // Empty box means "use the system's domain".
  Box domain;

  const Box& box_for(const SystemDef& sys) const {
    return domain.lower.size() == 0 ? sys.domain : domain;
  }
  void validate() const;
};

using Rng = std::mt19937_64;

// Independent generator for sample `index`, so results do not depend on how
// samples are scheduled across threads.
Rng sample_rng(std::uint64_t seed, std::uint64_t index);

Eigen::VectorXd uniform_in_box(Rng& rng, const Box& box);
double uniform_in(Rng& rng, double lo, double hi);

// Uniform on the Euclidean unit sphere, then rescaled to unit metric norm at x.
Eigen::VectorXd unit_tangent(Rng& rng, const MetricSpec& metric, const Eigen::VectorXd& x);

// Runs body(i) for i in [0, count) on a small pool of threads. The first
// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace ctk
