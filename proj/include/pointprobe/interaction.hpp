#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pointprobe/attribution.hpp"

namespace pointprobe {

/// Estimate of one m-th order pair interaction: the extra value from i and j
/// cooperating under contexts of exactly m other regions,
/// E_S [v(S+ij) - v(S+i) - v(S+j) + v(S)] over |S| = m.
struct PairEstimate {
  double value = 0.0;
  double se = 0.0;    // 0 in exact mode
  int samples = 0;    // context draws (or enumerated contexts)
  bool exact = false;
};

/// Dispatches to exact enumeration when C(n-2, m) <= contexts, otherwise to
/// Monte-Carlo context sampling.
PairEstimate pair_interaction(GameContext& ctx, int i, int j, int order,
                              int contexts, std::uint64_t seed);

/// Exact mean over all size-m contexts.
PairEstimate pair_interaction_exact(GameContext& ctx, int i, int j, int order);

/// Monte-Carlo mean over `contexts` seeded uniform size-m draws (always
/// samples, regardless of C(n-2, m); context k's draw depends only on
/// (seed, k), so pairs sharing a seed share context streams).
PairEstimate pair_interaction_sampled(GameContext& ctx, int i, int j, int order,
                                      int contexts, std::uint64_t seed);

struct InteractionConfig {
  int contexts = 100;        // K per order per pair
  int max_pairs = 200;       // sampled pairs when n > all_pairs_limit
  int all_pairs_limit = 16;  // below this, every unordered pair is used
};

/// Per-order interaction strengths with sampling diagnostics. values[k] is
/// I^(m_k) >= 0; per_pair keeps the audited raw estimates.
struct InteractionProfile {
  std::vector<int> orders;
  std::vector<double> values;
  std::vector<double> normalized_orders;  // m / (n-2)
  int contexts_per_pair = 0;
  std::vector<std::vector<std::pair<int, int>>> cloud_pairs;  // per cloud
  std::vector<std::vector<std::vector<double>>> per_pair;     // [cloud][order][pair]
  std::vector<std::vector<std::vector<double>>> per_pair_se;
};

/// Order profile over clouds: per order, average the pair interactions
/// within each cloud, take the absolute value, then average over clouds
/// (the absolute value sits outside the pair mean and inside the cloud mean).
InteractionProfile order_profile(const std::vector<GameContext*>& games,
                                 const InteractionConfig& cfg, std::uint64_t seed);

/// Same aggregation restricted to pairs (i*, j) with j in the given
/// neighborhood of the per-cloud focus region i*.
InteractionProfile sensitive_region_profile(
    const std::vector<GameContext*>& games, const std::vector<int>& focus_region,
    const std::vector<std::vector<int>>& focus_neighbors,
    const InteractionConfig& cfg, std::uint64_t seed);

/// |v(N) - (v(empty) + sum_i (v({i}) - v(empty))
///   + sum_i sum_{j != i} sum_m (n-1-m)/(n(n-1)) I^(m)(i,j))|
/// computed by full enumeration; the module's primary correctness oracle.
/// Limited to 10 regions.
double efficiency_decomposition_residual(GameContext& ctx);

std::string interaction_profile_to_json(const InteractionProfile& profile);

}  // namespace pointprobe
