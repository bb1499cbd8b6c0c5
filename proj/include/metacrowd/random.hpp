#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace metacrowd {

using Rng = std::mt19937_64;

// Purpose tags keep the derived streams of different pipeline stages apart.
enum class Stream : std::uint64_t {
  project = 1,
  clustering,
  crowd_pool,
  support_annotation,
  meta_spawn,
  meta_annotation,
  task_difficulty,
  difficult_assignment,
  difficult_annotation,
  baseline_assignment,
  baseline_annotation,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the stream identified by (seed, purpose, ids...). Independent of
/// call order, so tasks can be simulated in any order or in parallel.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream purpose, std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(purpose)));
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, Stream purpose, std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(derive_seed(seed, purpose, ids));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Dirichlet draw via normalized Gamma variates.
inline std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng) {
  std::vector<double> out(concentration.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::gamma_distribution<double> gamma(concentration[i], 1.0);
    out[i] = gamma(rng);
    sum += out[i];
  }
  if (!(sum > 0.0)) {
    // All shapes tiny enough to underflow: fall back to the largest shape.
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (concentration[i] > concentration[best]) best = i;
    }
    std::fill(out.begin(), out.end(), 0.0);
    out[best] = 1.0;
    return out;
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace metacrowd
