#include "pointprobe/interaction.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "json.hpp"
#include "pointprobe/errors.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

namespace {

void check_pair(int n, int i, int j, int order) {
  if (i == j) throw ArgumentError("pair interaction needs i != j");
  if (i < 0 || i >= n || j < 0 || j >= n)
    throw ArgumentError("pair interaction: region index out of range");
  if (order < 0 || order > n - 2)
    throw ArgumentError("pair interaction: order must be in [0, n-2]");
}

std::vector<int> other_regions(int n, int i, int j) {
  std::vector<int> out;
  out.reserve(n - 2);
  for (int r = 0; r < n; ++r)
    if (r != i && r != j) out.push_back(r);
  return out;
}

CoalitionMask mask_of(const std::vector<int>& regions) {
  CoalitionMask m = 0;
  for (int r : regions) m |= CoalitionMask{1} << r;
  return m;
}

/// C(n, k) capped at `cap` (avoids overflow; only the comparison matters).
long long comb_capped(int n, int k, long long cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long c = 1;
  for (int t = 0; t < k; ++t) {
    c = c * (n - t) / (t + 1);
    if (c > cap) return cap + 1;
  }
  return c;
}

struct ContextDeltas {
  // masks per context: S, S+i, S+j, S+ij
  std::vector<std::array<CoalitionMask, 4>> quads;
};

ContextDeltas exact_contexts(int n, int i, int j, int order) {
  const std::vector<int> others = other_regions(n, i, j);
  const CoalitionMask bi = CoalitionMask{1} << i;
  const CoalitionMask bj = CoalitionMask{1} << j;
  ContextDeltas out;
  // Standard lexicographic combination walk over index positions.
  std::vector<int> idx(order);
  for (int k = 0; k < order; ++k) idx[k] = k;
  const int pool = static_cast<int>(others.size());
  for (;;) {
    CoalitionMask s = 0;
    for (int k = 0; k < order; ++k) s |= CoalitionMask{1} << others[idx[k]];
    out.quads.push_back({s, s | bi, s | bj, s | bi | bj});
    if (order == 0) break;
    int k = order - 1;
    while (k >= 0 && idx[k] == pool - order + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int t = k + 1; t < order; ++t) idx[t] = idx[t - 1] + 1;
  }
  return out;
}

ContextDeltas sampled_contexts(int n, int i, int j, int order, int contexts,
                               std::uint64_t seed) {
  const std::vector<int> others = other_regions(n, i, j);
  const CoalitionMask bi = CoalitionMask{1} << i;
  const CoalitionMask bj = CoalitionMask{1} << j;
  ContextDeltas out;
  out.quads.reserve(contexts);
  for (int k = 0; k < contexts; ++k) {
    Rng rng(seed_combine(seed, static_cast<std::uint64_t>(k)));
    const CoalitionMask s = mask_of(rng.sample(others, order));
    out.quads.push_back({s, s | bi, s | bj, s | bi | bj});
  }
  return out;
}

PairEstimate estimate_from_quads(GameContext& ctx, const ContextDeltas& deltas,
                                 bool exact) {
  std::vector<CoalitionMask> needed;
  needed.reserve(deltas.quads.size() * 4);
  for (const auto& q : deltas.quads) needed.insert(needed.end(), q.begin(), q.end());
  ctx.ensure(needed);

  const int count = static_cast<int>(deltas.quads.size());
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& q : deltas.quads) {
    const double d =
        ctx.value(q[3]) - ctx.value(q[1]) - ctx.value(q[2]) + ctx.value(q[0]);
    sum += d;
    sum_sq += d * d;
  }
  PairEstimate est;
  est.value = sum / count;
  est.samples = count;
  est.exact = exact;
  if (!exact && count > 1) {
    const double var =
        std::max(0.0, (sum_sq - count * est.value * est.value) / (count - 1));
    est.se = std::sqrt(var / count);
  }
  return est;
}

}  // namespace

PairEstimate pair_interaction_exact(GameContext& ctx, int i, int j, int order) {
  const int n = ctx.num_regions();
  check_pair(n, i, j, order);
  return estimate_from_quads(ctx, exact_contexts(n, i, j, order), true);
}

PairEstimate pair_interaction_sampled(GameContext& ctx, int i, int j, int order,
                                      int contexts, std::uint64_t seed) {
  const int n = ctx.num_regions();
  check_pair(n, i, j, order);
  if (contexts < 1) throw ArgumentError("pair interaction needs K >= 1 contexts");
  return estimate_from_quads(ctx, sampled_contexts(n, i, j, order, contexts, seed),
                             false);
}

PairEstimate pair_interaction(GameContext& ctx, int i, int j, int order,
                              int contexts, std::uint64_t seed) {
  const int n = ctx.num_regions();
  check_pair(n, i, j, order);
  if (contexts < 1) throw ArgumentError("pair interaction needs K >= 1 contexts");
  if (comb_capped(n - 2, order, contexts) <= contexts)
    return pair_interaction_exact(ctx, i, j, order);
  return pair_interaction_sampled(ctx, i, j, order, contexts, seed);
}

namespace {

InteractionProfile profile_over_pairs(
    const std::vector<GameContext*>& games,
    const std::vector<std::vector<std::pair<int, int>>>& cloud_pairs,
    const InteractionConfig& cfg, std::uint64_t seed) {
  const int n = games.front()->num_regions();
  if (n < 2) throw ArgumentError("interaction profile needs at least 2 regions");

  InteractionProfile profile;
  profile.contexts_per_pair = cfg.contexts;
  profile.cloud_pairs = cloud_pairs;
  for (int m = 0; m <= n - 2; ++m) {
    profile.orders.push_back(m);
    profile.normalized_orders.push_back(n == 2 ? 0.0
                                                : static_cast<double>(m) / (n - 2));
  }

  const std::size_t clouds = games.size();
  profile.per_pair.resize(clouds);
  profile.per_pair_se.resize(clouds);
  profile.values.assign(profile.orders.size(), 0.0);

  for (std::size_t c = 0; c < clouds; ++c) {
    GameContext& ctx = *games[c];
    const auto& pairs = cloud_pairs[c];
    profile.per_pair[c].resize(profile.orders.size());
    profile.per_pair_se[c].resize(profile.orders.size());
    for (std::size_t oi = 0; oi < profile.orders.size(); ++oi) {
      const int m = profile.orders[oi];
      // Context draws share the (cloud, order) substream across pairs, which
      // stabilizes the pair mean before the absolute value is taken.
      const std::uint64_t ctx_seed =
          substream(seed, "contexts", static_cast<std::uint64_t>(c),
                    static_cast<std::uint64_t>(m));
      double pair_sum = 0.0;
      for (const auto& [i, j] : pairs) {
        const PairEstimate est = pair_interaction(ctx, i, j, m, cfg.contexts, ctx_seed);
        pair_sum += est.value;
        profile.per_pair[c][oi].push_back(est.value);
        profile.per_pair_se[c][oi].push_back(est.se);
      }
      const double pair_mean = pair_sum / static_cast<double>(pairs.size());
      profile.values[oi] += std::abs(pair_mean);
    }
  }
  for (auto& v : profile.values) v /= static_cast<double>(clouds);
  return profile;
}

}  // namespace

InteractionProfile order_profile(const std::vector<GameContext*>& games,
                                 const InteractionConfig& cfg, std::uint64_t seed) {
  if (games.empty()) throw ArgumentError("order_profile needs at least one cloud");
  const int n = games.front()->num_regions();

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  if (n > cfg.all_pairs_limit &&
      static_cast<int>(pairs.size()) > cfg.max_pairs) {
    std::vector<int> pool(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) pool[k] = static_cast<int>(k);
    Rng rng(substream(seed, "pairs"));
    std::vector<int> chosen = rng.sample(pool, cfg.max_pairs);
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::pair<int, int>> subset;
    subset.reserve(chosen.size());
    for (int k : chosen) subset.push_back(pairs[k]);
    pairs = std::move(subset);
  }

  return profile_over_pairs(
      games, std::vector<std::vector<std::pair<int, int>>>(games.size(), pairs), cfg,
      seed);
}

InteractionProfile sensitive_region_profile(
    const std::vector<GameContext*>& games, const std::vector<int>& focus_region,
    const std::vector<std::vector<int>>& focus_neighbors,
    const InteractionConfig& cfg, std::uint64_t seed) {
  if (games.empty()) throw ArgumentError("profile needs at least one cloud");
  if (focus_region.size() != games.size() || focus_neighbors.size() != games.size())
    throw ArgumentError("focus regions/neighbors must match the cloud count");

  std::vector<std::vector<std::pair<int, int>>> cloud_pairs(games.size());
  for (std::size_t c = 0; c < games.size(); ++c) {
    if (focus_neighbors[c].empty())
      throw ArgumentError("focus region " + std::to_string(focus_region[c]) +
                          " of cloud " + std::to_string(c) + " is isolated");
    for (int j : focus_neighbors[c]) cloud_pairs[c].emplace_back(focus_region[c], j);
  }
  return profile_over_pairs(games, cloud_pairs, cfg, seed);
}

double efficiency_decomposition_residual(GameContext& ctx) {
  const int n = ctx.num_regions();
  if (n < 2) throw ArgumentError("decomposition needs at least 2 regions");
  if (n > 10)
    throw SizeError("efficiency decomposition enumerates all orders; n > 10 refused");

  const CoalitionMask full = full_coalition(n);
  std::vector<CoalitionMask> all;
  all.reserve(std::size_t{1} << n);
  for (CoalitionMask m = 0; m <= full; ++m) all.push_back(m);
  ctx.ensure(all);

  const double v_empty = ctx.value(0);
  double rhs = v_empty;
  for (int i = 0; i < n; ++i) rhs += ctx.value(CoalitionMask{1} << i) - v_empty;

  // Unordered pairs contribute twice (the interaction is commutative).
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto others = other_regions(n, i, j);
      const CoalitionMask bi = CoalitionMask{1} << i;
      const CoalitionMask bj = CoalitionMask{1} << j;
      std::vector<double> order_sum(n - 1, 0.0);
      std::vector<long long> order_count(n - 1, 0);
      const CoalitionMask sub_limit = full_coalition(n - 2);
      for (CoalitionMask bits = 0; bits <= sub_limit; ++bits) {
        CoalitionMask s = 0;
        for (int k = 0; k < n - 2; ++k)
          if ((bits >> k) & 1u) s |= CoalitionMask{1} << others[k];
        const int size = std::popcount(bits);
        order_sum[size] +=
            ctx.value(s | bi | bj) - ctx.value(s | bi) - ctx.value(s | bj) + ctx.value(s);
        ++order_count[size];
        if (bits == sub_limit) break;  // guards the n == 2 wraparound
      }
      for (int m = 0; m <= n - 2; ++m) {
        const double interaction = order_sum[m] / static_cast<double>(order_count[m]);
        const double weight = static_cast<double>(n - 1 - m) /
                              (static_cast<double>(n) * (n - 1));
        rhs += 2.0 * weight * interaction;
      }
    }
  }
  return std::abs(ctx.value(full) - rhs);
}

std::string interaction_profile_to_json(const InteractionProfile& profile) {
  nlohmann::json doc;
  doc["orders"] = profile.orders;
  doc["values"] = profile.values;
  doc["normalized_orders"] = profile.normalized_orders;
  doc["contexts_per_pair"] = profile.contexts_per_pair;
  return doc.dump(1);
}

}  // namespace pointprobe
