#include <bit>
#include <cmath>
#include <memory>

#include "doctest.h"
#include "pointprobe/attribution.hpp"
#include "pointprobe/errors.hpp"
#include "test_helpers.hpp"

using namespace pointprobe;
using tests::additive_game;
using tests::random_game;

namespace {

/// Wraps a game to count underlying evaluations.
class CountingGame : public CoalitionGame {
 public:
  CountingGame(int regions, std::function<double(CoalitionMask)> fn)
      : regions_(regions), fn_(std::move(fn)) {}
  int num_regions() const override { return regions_; }
  std::vector<double> values(const std::vector<CoalitionMask>& masks) const override {
    calls_ += masks.size();
    std::vector<double> out;
    for (CoalitionMask m : masks) out.push_back(fn_(m));
    return out;
  }
  std::size_t calls() const { return calls_; }

 private:
  int regions_;
  std::function<double(CoalitionMask)> fn_;
  mutable std::size_t calls_ = 0;
};

}  // namespace

TEST_SUITE("attribution") {

TEST_CASE("additive games attribute each region its own weight") {
  const std::vector<double> w{0.5, -1.25, 2.0, 0.0, 3.5};
  GameContext ctx = additive_game(w);
  const AttributionResult result = exact_shapley(ctx);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(result.phi[i] == doctest::Approx(w[i]).epsilon(1e-12));
  CHECK(result.exact);
}

TEST_CASE("two-player game splits value over both orderings") {
  GameContext ctx(std::make_shared<FunctionGame>(2, [](CoalitionMask m) {
    switch (m) {
      case 0b00: return 0.0;
      case 0b01: return 1.0;
      case 0b10: return 2.0;
      default: return 4.0;
    }
  }));
  const AttributionResult result = exact_shapley(ctx);
  CHECK(result.phi[0] == doctest::Approx(1.5));
  CHECK(result.phi[1] == doctest::Approx(2.5));
  CHECK(result.v_full == 4.0);
  CHECK(result.v_empty == 0.0);
}

TEST_CASE("symmetric players receive equal attributions") {
  // Players 0 and 1 contribute identically to every coalition.
  GameContext ctx(std::make_shared<FunctionGame>(5, [](CoalitionMask m) {
    const int either = (coalition_contains(m, 0) ? 1 : 0) +
                       (coalition_contains(m, 1) ? 1 : 0);
    const double rest = Rng(seed_combine(99, m >> 2)).uniform();
    return either * 0.7 + rest * (1 + std::popcount(m >> 2));
  }));
  const AttributionResult result = exact_shapley(ctx);
  CHECK(result.phi[0] == doctest::Approx(result.phi[1]).epsilon(1e-12));
}

TEST_CASE("exact shapley is linear in the game") {
  const std::uint64_t sa = 101, sb = 202;
  GameContext a = random_game(6, sa);
  GameContext b = random_game(6, sb);
  GameContext sum(std::make_shared<FunctionGame>(6, [=](CoalitionMask m) {
    return Rng(seed_combine(sa, m)).uniform() + Rng(seed_combine(sb, m)).uniform();
  }));
  const auto ra = exact_shapley(a), rb = exact_shapley(b), rs = exact_shapley(sum);
  for (int i = 0; i < 6; ++i)
    CHECK(rs.phi[i] == doctest::Approx(ra.phi[i] + rb.phi[i]).epsilon(1e-12));
}

TEST_CASE("dummy players get exactly their standalone value") {
  // Region 2 always adds the constant 0.25 (nullity axiom).
  GameContext ctx(std::make_shared<FunctionGame>(4, [](CoalitionMask m) {
    const double base = Rng(seed_combine(7, m & ~CoalitionMask{4})).uniform();
    return base + (coalition_contains(m, 2) ? 0.25 : 0.0);
  }));
  const AttributionResult result = exact_shapley(ctx);
  CHECK(result.phi[2] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("exact shapley refuses oversized games") {
  GameContext ctx = random_game(13, 1);
  CHECK_THROWS_AS(exact_shapley(ctx), SizeError);
}

TEST_CASE("sampling with the identity permutation telescopes prefix values") {
  GameContext ctx = random_game(6, 404);
  std::vector<int> identity{0, 1, 2, 3, 4, 5};
  const AttributionResult result =
      sampled_shapley_with_permutations(ctx, {identity}, 0);
  CoalitionMask prefix = 0;
  double prev = ctx.value(0);
  for (int i = 0; i < 6; ++i) {
    prefix |= CoalitionMask{1} << i;
    const double cur = ctx.value(prefix);
    CHECK(result.phi[i] == doctest::Approx(cur - prev).epsilon(1e-15));
    prev = cur;
  }
}

TEST_CASE("efficiency holds exactly for any sample count") {
  GameContext ctx = random_game(10, 505);
  for (int m : {1, 2, 7, 40}) {
    const AttributionResult result = sampled_shapley(ctx, m, 99);
    double sum = 0.0;
    for (double phi : result.phi) sum += phi;
    CHECK(std::abs(sum - (result.v_full - result.v_empty)) < 1e-9);
  }
}

TEST_CASE("sampled estimates converge to the exact values") {
  GameContext ctx = random_game(8, 606);
  const AttributionResult exact = exact_shapley(ctx);
  const AttributionResult sampled = sampled_shapley(ctx, 5000, 123);
  for (int i = 0; i < 8; ++i) {
    const double err = std::abs(sampled.phi[i] - exact.phi[i]);
    CHECK(err <= 3.0 * sampled.se[i]);
    CHECK(sampled.se[i] > 0.0);
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  GameContext a = random_game(9, 707);
  GameContext b = random_game(9, 707);
  const AttributionResult ra = sampled_shapley(a, 50, 42);
  const AttributionResult rb = sampled_shapley(b, 50, 42);
  CHECK(ra.phi == rb.phi);
  CHECK(ra.se == rb.se);
}

TEST_CASE("memoization bounds the number of game evaluations") {
  const int n = 8, m_count = 60;
  auto counting = std::make_shared<CountingGame>(n, [](CoalitionMask m) {
    return Rng(seed_combine(99, m)).uniform();
  });
  GameContext ctx(counting);
  (void)sampled_shapley(ctx, m_count, 17);
  CHECK(counting->calls() <= static_cast<std::size_t>(m_count) * (n + 1) + 2);
  CHECK(counting->calls() == ctx.game_evaluations());

  // Saturation: exhaustive enumeration caps at 2^n distinct coalitions.
  (void)exact_shapley(ctx);
  (void)sampled_shapley(ctx, 200, 18);
  CHECK(counting->calls() <= (std::size_t{1} << n));
}

TEST_CASE("attribution export carries the full estimator state") {
  GameContext ctx = random_game(4, 808);
  const AttributionResult result = sampled_shapley(ctx, 12, 55);
  const std::string text = attribution_to_json(result);
  CHECK(text.find("\"phi\"") != std::string::npos);
  CHECK(text.find("\"v_full\"") != std::string::npos);
  CHECK(text.find("\"v_empty\"") != std::string::npos);
  CHECK(text.find("\"M\": 12") != std::string::npos);
  CHECK(text.find("\"se\"") != std::string::npos);
  CHECK(text.find("\"seed\": 55") != std::string::npos);
}

}  // TEST_SUITE
