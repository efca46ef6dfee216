#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointprobe/attribution.hpp"
#include "pointprobe/geometry.hpp"
#include "pointprobe/model.hpp"

namespace pointprobe {

struct ShapleyConfig {
  int permutations = 100;
  bool exact = false;
  /// Reuse one permutation substream for every transform of a grid; lowers
  /// the variance of the per-region max-min range.
  bool shared_permutations = true;
  int workers = 1;
};

/// Per-region attributions of one cloud across one transform family:
/// phi[t][i] plus the game endpoints per transform.
struct AttributionTable {
  std::string family;
  std::vector<TransformSpec> specs;
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> se;
  std::vector<double> v_full;
  std::vector<double> v_empty;

  int transforms() const { return static_cast<int>(specs.size()); }
  int regions() const { return phi.empty() ? 0 : static_cast<int>(phi[0].size()); }
};

/// Runs one Shapley estimate per transformed cloud. Transform rows are
/// independent jobs spread over the workers; results land in spec order.
AttributionTable attribution_table(const ModelOracle& oracle, const RewardSpec& spec,
                                   const RegionPartition& part,
                                   const std::vector<PointCloud>& transformed,
                                   const std::vector<TransformSpec>& specs,
                                   const ShapleyConfig& cfg, std::uint64_t seed,
                                   const std::string& family);

struct RegionSensitivity {
  double a = 0.0;  // (max_T phi - min_T phi) / Z
  double phi_max = 0.0;
  double phi_min = 0.0;
  int t_max = 0;  // transform indices achieving the extremes
  int t_min = 0;
};

struct CloudSensitivity {
  std::string sample_id;
  double z = 0.0;  // E_T sum_i |phi_T(i)|
  std::vector<RegionSensitivity> regions;
};

/// Throws DegenerateError when the normalizer Z vanishes (the oracle is
/// insensitive to every coalition of every transform).
CloudSensitivity sensitivity_from_table(const AttributionTable& table,
                                        const std::string& sample_id);

struct SensitivityResult {
  std::string family;
  std::vector<CloudSensitivity> clouds;
  double mean = 0.0;    // over all (cloud, region) values
  double stddev = 0.0;  // population std, the tables' "+-"
};

SensitivityResult aggregate_sensitivity(const std::string& family,
                                        std::vector<CloudSensitivity> clouds);

/// Most sensitive region of one cloud (lowest index on ties) and the grid
/// transforms achieving its extreme attributions.
struct SensitiveRegionPick {
  int region = 0;
  TransformSpec t_max;
  TransformSpec t_min;
};
SensitiveRegionPick most_sensitive_region(const AttributionTable& table,
                                          const CloudSensitivity& sens);

struct SmoothnessResult {
  std::string family;
  std::vector<double> per_cloud;  // normalized attribution gaps
  std::vector<double> z_smooth;   // per-cloud normalizer E_T |v(N) - v(empty)|
  double mean = 0.0;
  double stddev = 0.0;
};

/// Expected attribution gap between ball-query neighbors, normalized by the
/// expected full-vs-empty value gap (per cloud, then averaged).
SmoothnessResult non_smoothness(const std::string& family,
                                const std::vector<AttributionTable>& tables,
                                const std::vector<NeighborGraph>& graphs,
                                const std::vector<std::string>& sample_ids);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y);

struct CorrelationResult {
  std::string family;
  std::vector<double> per_cloud_r;
  std::vector<int> excluded_clouds;  // zero-variance clouds, skipped with warning
  double mean = 0.0;
  double stddev = 0.0;
};

/// Per cloud: r between the per-region mean |phi| over the grid and the
/// per-region sensitivity a_i; aggregated mean +- std over clouds.
CorrelationResult attribution_sensitivity_correlation(
    const std::string& family, const std::vector<AttributionTable>& tables,
    const std::vector<CloudSensitivity>& sensitivities);

struct BiasProbeResult {
  ProbVector probs;
  int top_class = 0;
  double top_prob = 0.0;
  bool biased = false;  // top probability above 0.5
};

/// Evaluates the fully-masked input (every point at the centroid, which is
/// the origin for normalized clouds).
BiasProbeResult bias_probe(const ModelOracle& oracle, int points);

}  // namespace pointprobe
