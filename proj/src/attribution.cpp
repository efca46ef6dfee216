#include "pointprobe/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_set>

#include "json.hpp"
#include "pointprobe/errors.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

OracleGame::OracleGame(const ModelOracle& oracle, const PointCloud& cloud,
                       const RegionPartition& part, const RewardSpec& spec,
                       int workers)
    : evaluator_(oracle.coalition_evaluator(cloud, part)),
      spec_(spec),
      regions_(part.region_count),
      workers_(workers) {
  spec_.validate();
  if (regions_ > 64) throw ArgumentError("coalition games support at most 64 regions");
  if (spec_.kind == RewardKind::classification_logit) {
    if (spec_.label >= evaluator_->num_classes())
      throw ArgumentError("reward label out of range for this oracle");
    return;
  }
  // Projection reward: anchor the direction z(N) - z(empty) once.
  const auto anchors =
      evaluator_->embeddings({full_coalition(regions_), CoalitionMask{0}}, workers_);
  const auto& z_full = anchors[0];
  z_empty_ = anchors[1];
  direction_.resize(z_full.size());
  double norm_sq = 0.0;
  for (std::size_t d = 0; d < z_full.size(); ++d) {
    direction_[d] = z_full[d] - z_empty_[d];
    norm_sq += direction_[d] * direction_[d];
  }
  direction_norm_ = std::sqrt(norm_sq);
  if (direction_norm_ < 1e-9)
    throw DegenerateError("projection reward: |z(N) - z(empty)| is near zero");
}

std::vector<double> OracleGame::values(const std::vector<CoalitionMask>& masks) const {
  std::vector<double> out(masks.size());
  if (spec_.kind == RewardKind::classification_logit) {
    const auto probs = evaluator_->evaluate(masks, workers_);
    for (std::size_t i = 0; i < masks.size(); ++i) {
      validate_probability_vector(probs[i], evaluator_->num_classes(), "coalition value");
      out[i] = logit_reward(probs[i][spec_.label], spec_.prob_clamp);
    }
    return out;
  }
  const auto embeddings = evaluator_->embeddings(masks, workers_);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    double dot = 0.0;
    for (std::size_t d = 0; d < direction_.size(); ++d)
      dot += direction_[d] * (embeddings[i][d] - z_empty_[d]);
    out[i] = dot / direction_norm_;
  }
  return out;
}

double GameContext::value(CoalitionMask mask) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = memo_.find(mask);
    if (it != memo_.end()) return it->second;
  }
  const double v = game_->values({mask})[0];
  std::lock_guard<std::mutex> lock(mutex_);
  const auto [it, inserted] = memo_.emplace(mask, v);
  if (inserted) ++evaluations_;
  return it->second;
}

void GameContext::ensure(const std::vector<CoalitionMask>& masks) {
  std::vector<CoalitionMask> missing;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::unordered_set<CoalitionMask> seen;
    for (CoalitionMask m : masks)
      if (!memo_.count(m) && seen.insert(m).second) missing.push_back(m);
  }
  if (missing.empty()) return;
  const std::vector<double> vals = game_->values(missing);
  std::lock_guard<std::mutex> lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i)
    if (memo_.emplace(missing[i], vals[i]).second) ++evaluations_;
}

std::size_t GameContext::game_evaluations() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return evaluations_;
}

GameContext make_oracle_context(const ModelOracle& oracle, const PointCloud& cloud,
                                const RegionPartition& part, const RewardSpec& spec,
                                int workers) {
  return GameContext(std::make_shared<OracleGame>(oracle, cloud, part, spec, workers));
}

AttributionResult exact_shapley(GameContext& ctx) {
  const int n = ctx.num_regions();
  if (n > 12)
    throw SizeError("exact_shapley enumerates 2^n coalitions; n > 12 refused");
  const CoalitionMask full = full_coalition(n);

  std::vector<CoalitionMask> all;
  all.reserve(std::size_t{1} << n);
  for (CoalitionMask m = 0; m <= full; ++m) all.push_back(m);
  ctx.ensure(all);

  std::vector<double> fact(n + 1, 1.0);
  for (int k = 1; k <= n; ++k) fact[k] = fact[k - 1] * k;

  AttributionResult result;
  result.phi.assign(n, 0.0);
  result.se.assign(n, 0.0);
  result.exact = true;
  for (int i = 0; i < n; ++i) {
    const CoalitionMask bit = CoalitionMask{1} << i;
    double phi = 0.0;
    for (CoalitionMask s = 0; s <= full; ++s) {
      if (s & bit) continue;
      const int size = std::popcount(s);
      const double weight = fact[size] * fact[n - size - 1] / fact[n];
      phi += weight * (ctx.value(s | bit) - ctx.value(s));
    }
    result.phi[i] = phi;
  }
  result.v_full = ctx.value(full);
  result.v_empty = ctx.value(0);
  return result;
}

AttributionResult sampled_shapley(GameContext& ctx, int permutations,
                                  std::uint64_t seed) {
  if (permutations < 1) throw ArgumentError("sampled_shapley needs M >= 1");
  const int n = ctx.num_regions();
  std::vector<std::vector<int>> perms;
  perms.reserve(permutations);
  for (int m = 0; m < permutations; ++m) {
    Rng rng(seed_combine(seed, static_cast<std::uint64_t>(m)));
    perms.push_back(rng.permutation(n));
  }
  return sampled_shapley_with_permutations(ctx, perms, seed);
}

AttributionResult sampled_shapley_with_permutations(
    GameContext& ctx, const std::vector<std::vector<int>>& permutations,
    std::uint64_t recorded_seed) {
  const int n = ctx.num_regions();
  const int m_count = static_cast<int>(permutations.size());
  if (m_count < 1) throw ArgumentError("need at least one permutation");
  const CoalitionMask full = full_coalition(n);

  // Every prefix of every permutation, evaluated in one deduplicated batch.
  std::vector<CoalitionMask> needed;
  needed.reserve(static_cast<std::size_t>(m_count) * (n + 1));
  needed.push_back(0);
  for (const auto& perm : permutations) {
    if (static_cast<int>(perm.size()) != n)
      throw ArgumentError("permutation length does not match region count");
    CoalitionMask mask = 0;
    for (int k = 0; k < n; ++k) {
      mask |= CoalitionMask{1} << perm[k];
      needed.push_back(mask);
    }
  }
  ctx.ensure(needed);

  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0), marginal(n, 0.0);
  for (const auto& perm : permutations) {
    CoalitionMask mask = 0;
    double prev = ctx.value(0);
    for (int k = 0; k < n; ++k) {
      mask |= CoalitionMask{1} << perm[k];
      const double cur = ctx.value(mask);
      marginal[perm[k]] = cur - prev;
      prev = cur;
    }
    for (int i = 0; i < n; ++i) {
      sum[i] += marginal[i];
      sum_sq[i] += marginal[i] * marginal[i];
    }
  }

  AttributionResult result;
  result.permutations = m_count;
  result.seed = recorded_seed;
  result.phi.resize(n);
  result.se.resize(n);
  for (int i = 0; i < n; ++i) {
    result.phi[i] = sum[i] / m_count;
    if (m_count > 1) {
      const double var =
          std::max(0.0, (sum_sq[i] - m_count * result.phi[i] * result.phi[i]) /
                            (m_count - 1));
      result.se[i] = std::sqrt(var / m_count);
    }
  }
  result.v_full = ctx.value(full);
  result.v_empty = ctx.value(0);
  return result;
}

std::string attribution_to_json(const AttributionResult& result) {
  nlohmann::json doc;
  doc["phi"] = result.phi;
  doc["v_full"] = result.v_full;
  doc["v_empty"] = result.v_empty;
  doc["M"] = result.permutations;
  doc["se"] = result.se;
  doc["seed"] = result.seed;
  doc["exact"] = result.exact;
  return doc.dump(1);
}

}  // namespace pointprobe
