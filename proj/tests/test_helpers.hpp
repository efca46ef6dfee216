#pragma once

#include <cstdint>
#include <vector>

#include "pointprobe/attribution.hpp"
#include "pointprobe/geometry.hpp"
#include "pointprobe/rng.hpp"

namespace tests {

using namespace pointprobe;

inline PointCloud random_cloud(int points, std::uint64_t seed, double spread = 1.0) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(points);
  for (int p = 0; p < points; ++p)
    cloud.points.push_back(spread * Vec3(rng.normal(), rng.normal(), rng.normal()));
  return cloud;
}

/// Seeded random coalition game: v(S) uniform in [0, 1] per mask, stable
/// across calls.
inline GameContext random_game(int regions, std::uint64_t seed) {
  return GameContext(std::make_shared<FunctionGame>(regions, [seed](CoalitionMask m) {
    return Rng(seed_combine(seed, m)).uniform();
  }));
}

/// Additive game v(S) = sum of per-region weights.
inline GameContext additive_game(const std::vector<double>& weights) {
  const int n = static_cast<int>(weights.size());
  return GameContext(std::make_shared<FunctionGame>(n, [weights, n](CoalitionMask m) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      if (coalition_contains(m, i)) v += weights[i];
    return v;
  }));
}

}  // namespace tests
