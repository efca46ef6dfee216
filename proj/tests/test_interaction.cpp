#include <cmath>
#include <memory>

#include "doctest.h"
#include "pointprobe/errors.hpp"
#include "pointprobe/interaction.hpp"
#include "test_helpers.hpp"

using namespace pointprobe;
using tests::additive_game;
using tests::random_game;

namespace {

/// v(S) = c iff both i and j are present; pair (i, j) interacts with
/// strength c at every order, everything else is silent.
GameContext pure_pair_game(int n, int i, int j, double c) {
  return GameContext(std::make_shared<FunctionGame>(n, [=](CoalitionMask m) {
    return (coalition_contains(m, i) && coalition_contains(m, j)) ? c : 0.0;
  }));
}

}  // namespace

TEST_SUITE("interaction") {

TEST_CASE("additive games have zero interactions at every order") {
  GameContext ctx = additive_game({1.0, -2.0, 0.5, 3.0, 0.25});
  for (int m = 0; m <= 3; ++m) {
    CHECK(pair_interaction_exact(ctx, 0, 1, m).value == doctest::Approx(0.0));
    CHECK(pair_interaction_sampled(ctx, 0, 1, m, 50, 9).value ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("a pure pair game interacts with constant strength") {
  GameContext ctx = pure_pair_game(6, 1, 4, 0.75);
  for (int m = 0; m <= 4; ++m) {
    CHECK(pair_interaction_exact(ctx, 1, 4, m).value == doctest::Approx(0.75));
    CHECK(pair_interaction(ctx, 1, 4, m, 100, 3).value == doctest::Approx(0.75));
  }
  // Other pairs stay silent.
  CHECK(pair_interaction_exact(ctx, 0, 2, 2).value == doctest::Approx(0.0));
}

TEST_CASE("sampled interactions agree with exact enumeration within 3 SE") {
  GameContext ctx = random_game(8, 1234);
  for (int m = 0; m <= 6; ++m) {
    const PairEstimate exact = pair_interaction_exact(ctx, 2, 5, m);
    const PairEstimate sampled = pair_interaction_sampled(ctx, 2, 5, m, 2000, 77);
    const double tol = std::max(3.0 * sampled.se, 1e-12);
    CHECK(std::abs(sampled.value - exact.value) <= tol);
  }
}

TEST_CASE("the dispatcher enumerates exactly when contexts cover the space") {
  GameContext ctx = random_game(8, 555);
  // C(6, 2) = 15 <= 100 contexts, so the dispatcher must go exact.
  const PairEstimate est = pair_interaction(ctx, 0, 1, 2, 100, 1);
  CHECK(est.exact);
  CHECK(est.samples == 15);
  CHECK(est.se == 0.0);
}

TEST_CASE("interactions commute when the context seed is shared") {
  GameContext ctx = random_game(10, 888);
  for (int m : {0, 3, 7}) {
    const PairEstimate ij = pair_interaction_sampled(ctx, 2, 6, m, 40, 5);
    const PairEstimate ji = pair_interaction_sampled(ctx, 6, 2, m, 40, 5);
    CHECK(ij.value == ji.value);
  }
}

TEST_CASE("interactions are linear in the game") {
  const std::uint64_t sa = 31, sb = 32;
  GameContext a = random_game(6, sa);
  GameContext b = random_game(6, sb);
  GameContext sum(std::make_shared<FunctionGame>(6, [=](CoalitionMask m) {
    return Rng(seed_combine(sa, m)).uniform() + Rng(seed_combine(sb, m)).uniform();
  }));
  for (int m = 0; m <= 4; ++m) {
    const double va = pair_interaction_exact(a, 1, 3, m).value;
    const double vb = pair_interaction_exact(b, 1, 3, m).value;
    const double vs = pair_interaction_exact(sum, 1, 3, m).value;
    CHECK(vs == doctest::Approx(va + vb).epsilon(1e-12));
  }
}

TEST_CASE("dummy players never interact") {
  // Region 1 contributes a constant on top of a game over the others.
  GameContext ctx(std::make_shared<FunctionGame>(5, [](CoalitionMask m) {
    const double rest = Rng(seed_combine(64, m & ~CoalitionMask{2})).uniform();
    return rest + (coalition_contains(m, 1) ? 0.6 : 0.0);
  }));
  for (int j : {0, 2, 4})
    for (int m = 0; m <= 3; ++m)
      CHECK(pair_interaction_exact(ctx, 1, j, m).value ==
            doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("argument checks") {
  GameContext ctx = random_game(5, 2);
  CHECK_THROWS_AS(pair_interaction_exact(ctx, 1, 1, 0), ArgumentError);
  CHECK_THROWS_AS(pair_interaction_exact(ctx, 0, 1, 4), ArgumentError);
  CHECK_THROWS_AS(pair_interaction_exact(ctx, 0, 1, -1), ArgumentError);
  CHECK_THROWS_AS(pair_interaction(ctx, 0, 1, 1, 0, 3), ArgumentError);
}

TEST_CASE("efficiency decomposition residual vanishes") {
  SUBCASE("seeded random game") {
    GameContext ctx = random_game(6, 4321);
    CHECK(efficiency_decomposition_residual(ctx) < 1e-6);
  }
  SUBCASE("additive game") {
    GameContext ctx = additive_game({1.0, 2.0, -0.5, 0.75});
    CHECK(efficiency_decomposition_residual(ctx) < 1e-9);
  }
  SUBCASE("two players by hand") {
    GameContext ctx(std::make_shared<FunctionGame>(2, [](CoalitionMask m) {
      switch (m) {
        case 0b00: return 0.3;
        case 0b01: return 1.1;
        case 0b10: return -0.4;
        default: return 2.0;
      }
    }));
    // v(N) = v(0) + sum singleton gains + I^(0), with the ordered-pair
    // weights summing to exactly one.
    const double i0 = 2.0 - 1.1 - (-0.4) + 0.3;
    const double rhs = 0.3 + (1.1 - 0.3) + (-0.4 - 0.3) + i0;
    CHECK(rhs == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(efficiency_decomposition_residual(ctx) < 1e-12);
  }
  SUBCASE("size limit") {
    GameContext ctx = random_game(11, 1);
    CHECK_THROWS_AS(efficiency_decomposition_residual(ctx), SizeError);
  }
}

TEST_CASE("order profile of additive and pure-pair games") {
  GameContext additive = additive_game({1.0, 2.0, 3.0, 4.0});
  InteractionConfig cfg;
  cfg.contexts = 50;
  const InteractionProfile zero = order_profile({&additive}, cfg, 1);
  for (double v : zero.values) CHECK(v == doctest::Approx(0.0));
  CHECK(zero.orders.size() == 3);  // m in {0, 1, 2}
  CHECK(zero.normalized_orders.back() == doctest::Approx(1.0));

  // Every pair of this 2-region game interacts with strength c.
  GameContext pair = pure_pair_game(2, 0, 1, -0.5);
  const InteractionProfile strong = order_profile({&pair}, cfg, 1);
  CHECK(strong.values[0] == doctest::Approx(0.5));  // |c|, absolute value
}

TEST_CASE("the absolute value sits outside the pair mean, inside the cloud mean") {
  // Two clouds with opposite pair interactions must NOT cancel.
  GameContext plus = pure_pair_game(2, 0, 1, 0.8);
  GameContext minus = pure_pair_game(2, 0, 1, -0.8);
  InteractionConfig cfg;
  const InteractionProfile both = order_profile({&plus, &minus}, cfg, 1);
  CHECK(both.values[0] == doctest::Approx(0.8));

  // Within one cloud, opposite pairs DO cancel before the absolute value.
  GameContext mixed(std::make_shared<FunctionGame>(4, [](CoalitionMask m) {
    double v = 0.0;
    if (coalition_contains(m, 0) && coalition_contains(m, 1)) v += 0.8;
    if (coalition_contains(m, 2) && coalition_contains(m, 3)) v -= 0.8;
    return v;
  }));
  const InteractionProfile cancel = order_profile({&mixed}, cfg, 1);
  for (double v : cancel.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("profile recomputes from the exported per-pair tables") {
  GameContext a = random_game(6, 99);
  GameContext b = random_game(6, 98);
  InteractionConfig cfg;
  cfg.contexts = 30;
  const InteractionProfile profile = order_profile({&a, &b}, cfg, 7);
  for (std::size_t oi = 0; oi < profile.orders.size(); ++oi) {
    double cloud_mean = 0.0;
    for (std::size_t c = 0; c < profile.per_pair.size(); ++c) {
      double pair_mean = 0.0;
      for (double v : profile.per_pair[c][oi]) pair_mean += v;
      pair_mean /= profile.per_pair[c][oi].size();
      cloud_mean += std::abs(pair_mean);
    }
    cloud_mean /= profile.per_pair.size();
    CHECK(profile.values[oi] == doctest::Approx(cloud_mean).epsilon(1e-12));
  }
}

TEST_CASE("focus-region profile equals the restricted aggregation") {
  GameContext game = random_game(6, 777);
  InteractionConfig cfg;
  cfg.contexts = 25;
  const int focus = 2;
  std::vector<int> neighbors{0, 1, 3, 4, 5};
  const InteractionProfile restricted =
      sensitive_region_profile({&game}, {focus}, {neighbors}, cfg, 13);

  for (std::size_t oi = 0; oi < restricted.orders.size(); ++oi) {
    const int m = restricted.orders[oi];
    double mean = 0.0;
    for (int j : neighbors) {
      const std::uint64_t ctx_seed = substream(13, "contexts", 0, m);
      mean += pair_interaction(game, focus, j, m, cfg.contexts, ctx_seed).value;
    }
    mean /= neighbors.size();
    CHECK(restricted.values[oi] == doctest::Approx(std::abs(mean)).epsilon(1e-12));
  }

  GameContext additive = additive_game({1, 2, 3, 4, 5, 6});
  const InteractionProfile zero =
      sensitive_region_profile({&additive}, {focus}, {neighbors}, cfg, 13);
  for (double v : zero.values) CHECK(v == doctest::Approx(0.0));

  CHECK_THROWS_AS(sensitive_region_profile({&game}, {0}, {{}}, cfg, 13),
                  ArgumentError);
}

}  // TEST_SUITE
