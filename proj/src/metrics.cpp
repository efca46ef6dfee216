#include "pointprobe/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pointprobe/errors.hpp"
#include "pointprobe/parallel.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

namespace {

constexpr double kNormalizerFloor = 1e-12;

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= values.size();
  return {mean, std::sqrt(var)};
}

}  // namespace

AttributionTable attribution_table(const ModelOracle& oracle, const RewardSpec& spec,
                                   const RegionPartition& part,
                                   const std::vector<PointCloud>& transformed,
                                   const std::vector<TransformSpec>& specs,
                                   const ShapleyConfig& cfg, std::uint64_t seed,
                                   const std::string& family) {
  if (transformed.size() != specs.size())
    throw ArgumentError("attribution_table: clouds and specs differ in length");
  if (transformed.empty()) throw ArgumentError("attribution_table: empty family");

  AttributionTable table;
  table.family = family;
  table.specs = specs;
  const std::size_t t_count = specs.size();
  table.phi.resize(t_count);
  table.se.resize(t_count);
  table.v_full.resize(t_count);
  table.v_empty.resize(t_count);

  parallel_for(t_count, cfg.workers, [&](std::size_t t) {
    GameContext ctx = make_oracle_context(oracle, transformed[t], part, spec, 1);
    const std::uint64_t run_seed =
        cfg.shared_permutations ? seed : seed_combine(seed, static_cast<std::uint64_t>(t));
    const AttributionResult result =
        cfg.exact ? exact_shapley(ctx)
                  : sampled_shapley(ctx, cfg.permutations, run_seed);
    table.phi[t] = result.phi;
    table.se[t] = result.se;
    table.v_full[t] = result.v_full;
    table.v_empty[t] = result.v_empty;
  });
  return table;
}

CloudSensitivity sensitivity_from_table(const AttributionTable& table,
                                        const std::string& sample_id) {
  const int t_count = table.transforms();
  const int n = table.regions();
  if (t_count < 1 || n < 1) throw ArgumentError("sensitivity needs a non-empty table");

  double z = 0.0;
  for (int t = 0; t < t_count; ++t)
    for (int i = 0; i < n; ++i) z += std::abs(table.phi[t][i]);
  z /= t_count;
  if (z < kNormalizerFloor)
    throw DegenerateError(
        "sensitivity normalizer vanished: the oracle is insensitive to every "
        "region under every transform");

  CloudSensitivity out;
  out.sample_id = sample_id;
  out.z = z;
  out.regions.resize(n);
  for (int i = 0; i < n; ++i) {
    RegionSensitivity& r = out.regions[i];
    r.phi_max = r.phi_min = table.phi[0][i];
    for (int t = 1; t < t_count; ++t) {
      const double phi = table.phi[t][i];
      if (phi > r.phi_max) {
        r.phi_max = phi;
        r.t_max = t;
      }
      if (phi < r.phi_min) {
        r.phi_min = phi;
        r.t_min = t;
      }
    }
    r.a = (r.phi_max - r.phi_min) / z;
  }
  return out;
}

SensitivityResult aggregate_sensitivity(const std::string& family,
                                        std::vector<CloudSensitivity> clouds) {
  SensitivityResult result;
  result.family = family;
  std::vector<double> pool;
  for (const auto& c : clouds)
    for (const auto& r : c.regions) pool.push_back(r.a);
  std::tie(result.mean, result.stddev) = mean_std(pool);
  result.clouds = std::move(clouds);
  return result;
}

SensitiveRegionPick most_sensitive_region(const AttributionTable& table,
                                          const CloudSensitivity& sens) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(sens.regions.size()); ++i)
    if (sens.regions[i].a > sens.regions[best].a) best = i;
  SensitiveRegionPick pick;
  pick.region = best;
  pick.t_max = table.specs[sens.regions[best].t_max];
  pick.t_min = table.specs[sens.regions[best].t_min];
  return pick;
}

SmoothnessResult non_smoothness(const std::string& family,
                                const std::vector<AttributionTable>& tables,
                                const std::vector<NeighborGraph>& graphs,
                                const std::vector<std::string>& sample_ids) {
  if (tables.size() != graphs.size())
    throw ArgumentError("non_smoothness: tables and graphs differ in length");
  if (tables.empty()) throw ArgumentError("non_smoothness: no clouds");

  SmoothnessResult result;
  result.family = family;
  for (std::size_t c = 0; c < tables.size(); ++c) {
    const AttributionTable& table = tables[c];
    const NeighborGraph& graph = graphs[c];
    const int n = table.regions();
    if (static_cast<int>(graph.neighbors.size()) != n)
      throw ArgumentError("non_smoothness: graph does not match table");
    if (graph.edge_count() == 0)
      throw ArgumentError("non_smoothness: neighbor graph of cloud " +
                          (c < sample_ids.size() ? sample_ids[c] : std::to_string(c)) +
                          " has no edges");

    double z = 0.0;
    for (int t = 0; t < table.transforms(); ++t)
      z += std::abs(table.v_full[t] - table.v_empty[t]);
    z /= table.transforms();
    if (z < kNormalizerFloor)
      throw DegenerateError("smoothness normalizer |v(N) - v(empty)| vanished");

    double t_mean = 0.0;
    for (int t = 0; t < table.transforms(); ++t) {
      double i_mean = 0.0;
      int i_count = 0;
      for (int i = 0; i < n; ++i) {
        if (graph.neighbors[i].empty()) continue;  // isolated regions are skipped
        double gap = 0.0;
        for (int j : graph.neighbors[i]) gap += std::abs(table.phi[t][i] - table.phi[t][j]);
        i_mean += gap / graph.neighbors[i].size();
        ++i_count;
      }
      t_mean += i_mean / i_count;
    }
    t_mean /= table.transforms();

    result.per_cloud.push_back(t_mean / z);
    result.z_smooth.push_back(z);
  }
  std::tie(result.mean, result.stddev) = mean_std(result.per_cloud);
  return result;
}

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ArgumentError("pearson: need two equal-length series of >= 2 values");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

CorrelationResult attribution_sensitivity_correlation(
    const std::string& family, const std::vector<AttributionTable>& tables,
    const std::vector<CloudSensitivity>& sensitivities) {
  if (tables.size() != sensitivities.size())
    throw ArgumentError("correlation: tables and sensitivities differ in length");

  CorrelationResult result;
  result.family = family;
  for (std::size_t c = 0; c < tables.size(); ++c) {
    const AttributionTable& table = tables[c];
    const int n = table.regions();
    if (n < 3) throw ArgumentError("correlation needs at least 3 regions");
    std::vector<double> mean_abs_phi(n, 0.0), a(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < table.transforms(); ++t)
        mean_abs_phi[i] += std::abs(table.phi[t][i]);
      mean_abs_phi[i] /= table.transforms();
      a[i] = sensitivities[c].regions[i].a;
    }
    const auto r = pearson(mean_abs_phi, a);
    if (r.has_value())
      result.per_cloud_r.push_back(*r);
    else
      result.excluded_clouds.push_back(static_cast<int>(c));
  }
  std::tie(result.mean, result.stddev) = mean_std(result.per_cloud_r);
  return result;
}

BiasProbeResult bias_probe(const ModelOracle& oracle, int points) {
  if (points < 1) throw ArgumentError("bias probe needs at least one point");
  PointCloud empty_input;
  empty_input.points.assign(points, Vec3::Zero());
  empty_input.id = "empty-input";
  BiasProbeResult result;
  result.probs = oracle.evaluate({empty_input}).at(0);
  validate_probability_vector(result.probs, oracle.num_classes(), "bias probe");
  const auto top = std::max_element(result.probs.begin(), result.probs.end());
  result.top_class = static_cast<int>(top - result.probs.begin());
  result.top_prob = *top;
  result.biased = result.top_prob > 0.5;
  return result;
}

}  // namespace pointprobe
