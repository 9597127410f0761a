#include "ctk/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ctk {

void SamplePlan::validate() const {
  if (states <= 0 || tangents <= 0 || times <= 0) {
    throw std::invalid_argument("sample counts must be positive");
  }
  if (!(horizon >= 0.0)) throw std::invalid_argument("sample window must be non-negative");
}

Rng sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

double uniform_in(Rng& rng, double lo, double hi) {
  // Built from raw 53-bit draws so the stream is identical across standard
  // libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

Eigen::VectorXd uniform_in_box(Rng& rng, const Box& box) {
  Eigen::VectorXd x(box.dim());
  for (Eigen::Index i = 0; i < box.dim(); ++i) x(i) = uniform_in(rng, box.lower(i), box.upper(i));
  return x;
}

Eigen::VectorXd unit_tangent(Rng& rng, const MetricSpec& metric, const Eigen::VectorXd& x) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(x.size());
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  v /= norm;
  return v / metric_norm(metric, x, v);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace ctk
