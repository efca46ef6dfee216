#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pointprobe/config.hpp"

namespace pointprobe {

/// Normalized cloud with its region partition and neighbor graph; the unit
/// every analysis works on.
struct PreparedCloud {
  PointCloud cloud;
  RegionPartition part;
  NeighborGraph graph;
};

PreparedCloud prepare_cloud(const PointCloud& raw, int regions,
                            double neighbor_radius = 0.0);

/// Attribution tables plus sensitivity for one transform family over many
/// clouds.
struct FamilyData {
  std::string family;
  std::vector<AttributionTable> tables;  // per cloud
  SensitivityResult sensitivity;
};

/// Transformed clouds (and matching specs) for a named family: one of
/// rotation | translation | scale | linearity | planarity | scattering.
std::vector<PointCloud> family_clouds(const PreparedCloud& prepared,
                                      const std::string& family,
                                      const RunConfig::Grids& grids,
                                      std::vector<TransformSpec>* specs_out);

FamilyData analyze_family(const ModelOracle& oracle, const std::string& family,
                          const std::vector<PreparedCloud>& clouds,
                          const RunConfig::Grids& grids, const ShapleyConfig& shapley,
                          RewardKind reward, std::uint64_t seed);

std::unique_ptr<ModelOracle> make_oracle(const RunConfig& cfg);

SyntheticDataset load_dataset(const RunConfig& cfg);

// --- training-recipe comparisons ---------------------------------------------

struct RecipeSpec {
  std::string name;
  AugmentationFlags augmentation;
  bool adversarial = false;
};

struct RecipeOutcome {
  std::string name;
  double test_accuracy = 0.0;
  /// family -> (mean, std) aggregate sensitivity
  std::map<std::string, std::pair<double, double>> sensitivity;
};

/// Trains every recipe from the same initial weights and data stream seed,
/// then runs the requested sensitivity families on each trained model.
std::vector<RecipeOutcome> augmentation_comparison(
    const std::vector<RecipeSpec>& recipes, const SyntheticDataset& data,
    const TrainConfig& base_train, const AttackConfig& attack,
    const std::vector<std::string>& families, int regions,
    const ShapleyConfig& shapley, const RunConfig::Grids& grids, int max_clouds,
    std::uint64_t seed);

// --- CLI commands --------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg, bool adversarial);
int cmd_analyze(const RunConfig& cfg);
int cmd_attack_run(const RunConfig& cfg);
int cmd_report(const std::string& out_dir, std::ostream& out);

/// stdout float formatting used by every CSV writer ("%.17g").
std::string fmt_double(double v);

std::uint64_t fnv1a_hash(const std::string& bytes);

}  // namespace pointprobe
