#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "pointprobe/geometry.hpp"
#include "pointprobe/model.hpp"

namespace pointprobe {

/// A cooperative game over region coalitions: batch evaluation of v(S).
class CoalitionGame {
 public:
  virtual ~CoalitionGame() = default;
  virtual int num_regions() const = 0;
  virtual std::vector<double> values(const std::vector<CoalitionMask>& masks) const = 0;
};

/// Game backed by an explicit value function (tests, synthetic games).
class FunctionGame : public CoalitionGame {
 public:
  FunctionGame(int regions, std::function<double(CoalitionMask)> fn)
      : regions_(regions), fn_(std::move(fn)) {}
  int num_regions() const override { return regions_; }
  std::vector<double> values(const std::vector<CoalitionMask>& masks) const override {
    std::vector<double> out;
    out.reserve(masks.size());
    for (CoalitionMask m : masks) out.push_back(fn_(m));
    return out;
  }

 private:
  int regions_;
  std::function<double(CoalitionMask)> fn_;
};

/// Game defined by masking a cloud and scoring the oracle's output:
/// v(S) = log(p/(1-p)) of the ground-truth class (classification reward) or
/// the projection of z(S)-z(empty) onto z(N)-z(empty) (embedding reward).
class OracleGame : public CoalitionGame {
 public:
  OracleGame(const ModelOracle& oracle, const PointCloud& cloud,
             const RegionPartition& part, const RewardSpec& spec, int workers = 1);
  int num_regions() const override { return regions_; }
  std::vector<double> values(const std::vector<CoalitionMask>& masks) const override;

 private:
  std::unique_ptr<CoalitionEvaluator> evaluator_;
  RewardSpec spec_;
  int regions_;
  int workers_;
  // embedding-projection state
  std::vector<double> z_empty_;
  std::vector<double> direction_;
  double direction_norm_ = 0.0;
};

/// Memoizing wrapper around a game. The memo behaves as one logical map,
/// safe for concurrent insert/lookup, and counts underlying evaluations so
/// tests can assert call budgets.
class GameContext {
 public:
  explicit GameContext(std::shared_ptr<const CoalitionGame> game)
      : game_(std::move(game)) {}

  int num_regions() const { return game_->num_regions(); }

  /// Memoized single lookup.
  double value(CoalitionMask mask);

  /// Evaluates all not-yet-known masks in one deduplicated batch.
  void ensure(const std::vector<CoalitionMask>& masks);

  std::size_t game_evaluations() const;

 private:
  std::shared_ptr<const CoalitionGame> game_;
  mutable std::mutex mutex_;
  std::unordered_map<CoalitionMask, double> memo_;
  std::size_t evaluations_ = 0;
};

GameContext make_oracle_context(const ModelOracle& oracle, const PointCloud& cloud,
                                const RegionPartition& part, const RewardSpec& spec,
                                int workers = 1);

/// Estimated Shapley vector with game-value endpoints and sampling
/// diagnostics. The permutation estimator keeps sum(phi) = v(N) - v(empty)
/// for any sample count.
struct AttributionResult {
  std::vector<double> phi;
  std::vector<double> se;  // standard error per region (0 in exact mode)
  double v_full = 0.0;
  double v_empty = 0.0;
  int permutations = 0;    // 0 in exact mode
  std::uint64_t seed = 0;
  bool exact = false;
};

/// Full enumeration of Eq-style Shapley weights; limited to 12 regions.
AttributionResult exact_shapley(GameContext& ctx);

/// Mean of per-permutation marginal contributions over M seeded uniform
/// permutations; the per-region standard error comes from the sample
/// variance across permutations.
AttributionResult sampled_shapley(GameContext& ctx, int permutations,
                                  std::uint64_t seed);

/// Same estimator with caller-supplied permutations (each a permutation of
/// {0..n-1}); the building block of sampled_shapley and of tests that pin
/// specific orders.
AttributionResult sampled_shapley_with_permutations(
    GameContext& ctx, const std::vector<std::vector<int>>& permutations,
    std::uint64_t recorded_seed);

std::string attribution_to_json(const AttributionResult& result);

}  // namespace pointprobe
