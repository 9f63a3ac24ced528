#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "smoothql/profile.hpp"

namespace smoothql {

/// SplitMix64 (Steele, Lea, Flood). Every seeded construction in the
/// library draws from this sequence so outputs are bit-reproducible.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Uniform (flat Dirichlet) point in the interior of each player's simplex.
inline StrategyProfile random_interior_profile(const std::vector<std::size_t>& counts, SplitMix64& rng) {
  BlockVector b(counts);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    double s = 0.0;
    for (double& v : b[k]) {
      v = -std::log(1.0 - rng.uniform());
      if (v < 1e-300) v = 1e-300;
      s += v;
    }
    for (double& v : b[k]) v /= s;
  }
  return StrategyProfile(std::move(b));
}

}  // namespace smoothql
