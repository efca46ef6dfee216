#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pointprobe/errors.hpp"
#include "pointprobe/metrics.hpp"
#include "test_helpers.hpp"

using namespace pointprobe;
using tests::random_cloud;

namespace {

AttributionTable hand_table(const std::vector<std::vector<double>>& phi,
                            std::vector<double> v_full = {},
                            std::vector<double> v_empty = {}) {
  AttributionTable table;
  table.family = "test";
  table.phi = phi;
  table.se.assign(phi.size(), std::vector<double>(phi[0].size(), 0.0));
  for (std::size_t t = 0; t < phi.size(); ++t)
    table.specs.push_back(TransformSpec::identity());
  table.v_full = v_full.empty() ? std::vector<double>(phi.size(), 1.0) : v_full;
  table.v_empty = v_empty.empty() ? std::vector<double>(phi.size(), 0.0) : v_empty;
  return table;
}

/// Oracle that ignores its input entirely.
class ConstantOracle : public ModelOracle {
 public:
  explicit ConstantOracle(ProbVector probs) : probs_(std::move(probs)) {}
  int num_classes() const override { return static_cast<int>(probs_.size()); }
  std::vector<ProbVector> evaluate(const std::vector<PointCloud>& batch) const override {
    return std::vector<ProbVector>(batch.size(), probs_);
  }

 private:
  ProbVector probs_;
};

/// Re-normalizes every input before delegating, making the inner model
/// exactly insensitive to uniform scaling.
class NormalizingOracle : public ModelOracle {
 public:
  explicit NormalizingOracle(const ModelOracle& inner) : inner_(inner) {}
  int num_classes() const override { return inner_.num_classes(); }
  std::vector<ProbVector> evaluate(const std::vector<PointCloud>& batch) const override {
    std::vector<PointCloud> fixed;
    fixed.reserve(batch.size());
    for (const auto& cloud : batch) fixed.push_back(normalize(cloud));
    return inner_.evaluate(fixed);
  }

 private:
  const ModelOracle& inner_;
};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("a single-transform grid gives zero sensitivity") {
  const auto table = hand_table({{0.4, -0.2, 0.9}});
  const CloudSensitivity sens = sensitivity_from_table(table, "x");
  for (const auto& r : sens.regions) CHECK(r.a == 0.0);
  CHECK(sens.z == doctest::Approx(1.5));
}

TEST_CASE("sensitivity is the normalized range with argmax bookkeeping") {
  const auto table = hand_table({{1.0, 0.0}, {3.0, 0.5}, {-1.0, 0.25}});
  const CloudSensitivity sens = sensitivity_from_table(table, "x");
  // Z = mean over transforms of sum |phi| = (1 + 3.5 + 1.25) / 3
  const double z = (1.0 + 3.5 + 1.25) / 3.0;
  CHECK(sens.z == doctest::Approx(z));
  CHECK(sens.regions[0].a == doctest::Approx(4.0 / z));
  CHECK(sens.regions[0].t_max == 1);
  CHECK(sens.regions[0].t_min == 2);
  CHECK(sens.regions[1].a == doctest::Approx(0.5 / z));
}

TEST_CASE("an everywhere-silent attribution table is degenerate") {
  const auto table = hand_table({{0.0, 0.0}, {0.0, 0.0}});
  CHECK_THROWS_AS(sensitivity_from_table(table, "x"), DegenerateError);
}

TEST_CASE("an input-blind oracle yields zero attributions everywhere") {
  const ConstantOracle oracle({0.25, 0.25, 0.25, 0.25});
  const PointCloud cloud = normalize(random_cloud(48, 3));
  const RegionPartition part = partition(cloud, farthest_point_sample(cloud, 4));
  RewardSpec spec;
  spec.label = 1;
  GameContext ctx = make_oracle_context(oracle, cloud, part, spec);
  const AttributionResult result = exact_shapley(ctx);
  for (double phi : result.phi) CHECK(phi == 0.0);
  // Folding such tables into a sensitivity normalizer must fail loudly.
  AttributionTable table;
  table.family = "rotation";
  table.specs = {TransformSpec::identity()};
  table.phi = {result.phi};
  table.se = {result.se};
  table.v_full = {result.v_full};
  table.v_empty = {result.v_empty};
  CHECK_THROWS_AS(sensitivity_from_table(table, "x"), DegenerateError);
}

TEST_CASE("positive game rescaling leaves sensitivities unchanged") {
  const std::vector<std::vector<double>> phi{{1.0, 0.2}, {0.5, -0.3}, {2.0, 0.0}};
  std::vector<std::vector<double>> scaled = phi;
  for (auto& row : scaled)
    for (auto& v : row) v *= 7.5;
  const CloudSensitivity a = sensitivity_from_table(hand_table(phi), "x");
  const CloudSensitivity b = sensitivity_from_table(hand_table(scaled), "x");
  for (std::size_t i = 0; i < a.regions.size(); ++i)
    CHECK(a.regions[i].a == doctest::Approx(b.regions[i].a).epsilon(1e-9));
}

TEST_CASE("an exactly scale-invariant oracle has zero scale sensitivity") {
  const BuiltinClassifier inner(4, 11);
  const NormalizingOracle oracle(inner);
  const PointCloud cloud = normalize(random_cloud(64, 13));
  const RegionPartition part = partition(cloud, farthest_point_sample(cloud, 8));
  RewardSpec spec;
  spec.label = 2;

  const TransformGrid grid = TransformGrid::scale(5);
  std::vector<PointCloud> transformed;
  for (const auto& t : grid.specs) transformed.push_back(apply_transform(cloud, t));
  ShapleyConfig cfg;
  cfg.exact = true;
  const AttributionTable table =
      attribution_table(oracle, spec, part, transformed, grid.specs, cfg, 1, "scale");
  const CloudSensitivity sens = sensitivity_from_table(table, "x");
  for (const auto& r : sens.regions) CHECK(std::abs(r.a) < 1e-9);
}

TEST_CASE("grid refinement never shrinks the raw attribution range") {
  Rng rng(71);
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 6; ++t) {
    rows.push_back({});
    for (int i = 0; i < 4; ++i) rows.back().push_back(rng.uniform(-1, 1));
  }
  const auto small = hand_table({rows.begin(), rows.begin() + 3});
  const auto big = hand_table(rows);
  const CloudSensitivity ss = sensitivity_from_table(small, "x");
  const CloudSensitivity sb = sensitivity_from_table(big, "x");
  for (int i = 0; i < 4; ++i) {
    const double range_small = ss.regions[i].phi_max - ss.regions[i].phi_min;
    const double range_big = sb.regions[i].phi_max - sb.regions[i].phi_min;
    CHECK(range_big >= range_small - 1e-15);
  }
}

TEST_CASE("most sensitive region with tie-break and argmax contract") {
  const auto table = hand_table({{0.0, 0.0, 0.0}, {1.0, 5.0, 5.0}});
  const CloudSensitivity sens = sensitivity_from_table(table, "x");
  const SensitiveRegionPick pick = most_sensitive_region(table, sens);
  CHECK(pick.region == 1);  // ties resolve to the lowest index
  const int i_star = pick.region;
  for (int t = 0; t < table.transforms(); ++t)
    CHECK(table.phi[sens.regions[i_star].t_max][i_star] >= table.phi[t][i_star]);

  const auto single = hand_table({{0.3}, {0.1}});
  const CloudSensitivity s1 = sensitivity_from_table(single, "x");
  CHECK(most_sensitive_region(single, s1).region == 0);
}

TEST_CASE("non-smoothness of hand-built tables") {
  NeighborGraph graph;
  graph.neighbors = {{1}, {0}};
  graph.radius = 1.0;

  SUBCASE("constant attributions are perfectly smooth") {
    const auto table = hand_table({{0.7, 0.7}, {0.3, 0.3}});
    const SmoothnessResult r = non_smoothness("t", {table}, {graph}, {"x"});
    CHECK(r.mean == doctest::Approx(0.0));
  }
  SUBCASE("two neighboring regions with unit gap") {
    const auto table = hand_table({{1.0, 0.0}});
    const SmoothnessResult r = non_smoothness("t", {table}, {graph}, {"x"});
    CHECK(r.mean == doctest::Approx(1.0));
    CHECK(r.z_smooth[0] == doctest::Approx(1.0));
  }
  SUBCASE("isolated graphs are rejected") {
    NeighborGraph empty;
    empty.neighbors = {{}, {}};
    const auto table = hand_table({{1.0, 0.0}});
    CHECK_THROWS_AS(non_smoothness("t", {table}, {empty}, {"x"}), ArgumentError);
  }
}

TEST_CASE("non-smoothness matches a straight-line recomputation") {
  Rng rng(17);
  std::vector<std::vector<double>> phi;
  for (int t = 0; t < 4; ++t) {
    phi.push_back({});
    for (int i = 0; i < 5; ++i) phi.back().push_back(rng.uniform(-2, 2));
  }
  std::vector<double> v_full, v_empty;
  for (int t = 0; t < 4; ++t) {
    v_full.push_back(rng.uniform(-1, 3));
    v_empty.push_back(rng.uniform(-1, 1));
  }
  NeighborGraph graph;
  graph.neighbors = {{1, 2}, {0}, {0, 3, 4}, {2}, {2}};
  const auto table = hand_table(phi, v_full, v_empty);
  const SmoothnessResult r = non_smoothness("t", {table}, {graph}, {"x"});

  double z = 0.0;
  for (int t = 0; t < 4; ++t) z += std::abs(v_full[t] - v_empty[t]);
  z /= 4.0;
  double t_mean = 0.0;
  for (int t = 0; t < 4; ++t) {
    double i_mean = 0.0;
    for (int i = 0; i < 5; ++i) {
      double gap = 0.0;
      for (int j : graph.neighbors[i]) gap += std::abs(phi[t][i] - phi[t][j]);
      i_mean += gap / graph.neighbors[i].size();
    }
    t_mean += i_mean / 5.0;
  }
  t_mean /= 4.0;
  CHECK(r.per_cloud[0] == doctest::Approx(t_mean / z).epsilon(1e-12));
}

TEST_CASE("pearson correlation on frozen hand vectors") {
  CHECK(*pearson({1, 2, 3, 4}, {2, 4, 6, 9}) ==
        doctest::Approx(0.994376712684369).epsilon(1e-12));
  CHECK(*pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(*pearson({1, 2, 3}, {-2, -4, -6}) == doctest::Approx(-1.0));
  CHECK(!pearson({1, 1, 1}, {2, 4, 6}).has_value());
  // Invariance under positive affine maps of either argument.
  Rng rng(5);
  std::vector<double> x, y, xa, yb;
  for (int k = 0; k < 12; ++k) {
    x.push_back(rng.uniform());
    y.push_back(rng.uniform());
    xa.push_back(3.0 * x.back() + 1.5);
    yb.push_back(0.25 * y.back() - 2.0);
  }
  CHECK(*pearson(x, y) == doctest::Approx(*pearson(xa, yb)).epsilon(1e-12));
}

TEST_CASE("attribution-sensitivity correlation") {
  // a_i proportional to the mean |phi| by construction: r = 1.
  const auto table = hand_table({{1.0, 2.0, 3.0, 4.0}, {-1.0, -2.0, -3.0, -4.0}});
  const CloudSensitivity sens = sensitivity_from_table(table, "x");
  const CorrelationResult r =
      attribution_sensitivity_correlation("t", {table}, {sens});
  REQUIRE(r.per_cloud_r.size() == 1);
  CHECK(r.per_cloud_r[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Constant attributions have zero variance: the cloud is excluded.
  const auto flat = hand_table({{1.0, 1.0, 1.0}, {-2.0, -2.0, -2.0}});
  const CloudSensitivity fs = sensitivity_from_table(flat, "x");
  const CorrelationResult rf = attribution_sensitivity_correlation("t", {flat}, {fs});
  CHECK(rf.per_cloud_r.empty());
  CHECK(rf.excluded_clouds == std::vector<int>{0});
}

TEST_CASE("bias probe on a uniform oracle") {
  const ConstantOracle oracle({0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125});
  const BiasProbeResult probe = bias_probe(oracle, 32);
  CHECK(!probe.biased);
  CHECK(probe.top_prob == doctest::Approx(0.125));
  double sum = 0.0;
  for (double p : probe.probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

  const ConstantOracle confident({0.9, 0.05, 0.05});
  const BiasProbeResult biased = bias_probe(confident, 32);
  CHECK(biased.biased);
  CHECK(biased.top_class == 0);
}

TEST_CASE("attribution tables are identical across worker counts") {
  const BuiltinClassifier model(5, 21);
  const PointCloud cloud = normalize(random_cloud(48, 23));
  const RegionPartition part = partition(cloud, farthest_point_sample(cloud, 6));
  RewardSpec spec;
  spec.label = 3;
  const TransformGrid grid = TransformGrid::rotation(2);
  std::vector<PointCloud> transformed;
  for (const auto& t : grid.specs) transformed.push_back(apply_transform(cloud, t));

  ShapleyConfig cfg;
  cfg.permutations = 25;
  std::vector<AttributionTable> tables;
  for (int workers : {1, 2, 4}) {
    cfg.workers = workers;
    tables.push_back(
        attribution_table(model, spec, part, transformed, grid.specs, cfg, 5, "rotation"));
  }
  for (std::size_t k = 1; k < tables.size(); ++k) {
    CHECK(tables[k].phi == tables[0].phi);
    CHECK(tables[k].v_full == tables[0].v_full);
  }
}

}  // TEST_SUITE
