#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointprobe/attack.hpp"
#include "pointprobe/external_oracle.hpp"
#include "pointprobe/interaction.hpp"
#include "pointprobe/metrics.hpp"
#include "pointprobe/structure.hpp"

namespace pointprobe {

inline constexpr const char* kToolVersion = "0.1.0";

/// Schema-validated run configuration. Unknown keys are rejected; every
/// default is materialized into the resolved form the CLI writes out, so a
/// bundle can be reproduced from its embedded config alone.
struct RunConfig {
  std::uint64_t seed = 17;
  int workers = 1;
  std::string out_dir = "out";

  struct Dataset {
    std::string kind = "synthetic";  // synthetic | directory
    std::vector<std::string> classes = default_shape_classes();
    int per_class = 50;
    int points = 256;
    double train_fraction = 0.8;
    std::string dir;  // for kind = directory (and gen-data output)
  } dataset;

  struct Oracle {
    std::string kind = "builtin";  // builtin | external
    std::string weights;           // builtin weight file
    std::string command;           // external command line
    int procs = 1;
    int timeout_ms = 30000;
  } oracle;

  struct Partition {
    int regions = 32;
    double neighbor_radius = 0.0;  // 0 = ball-query default
  } partition;

  struct Shapley {
    int permutations = 100;
    bool exact = false;
    bool shared_permutations = true;
  } shapley;

  struct Grids {
    int rotation_per_axis = 3;
    int translation_per_axis = 3;
    int scale_count = 7;
    int structure_max_per_direction = 20;
    double edit_eta = 0.001;
    double edit_gamma = 0.003;
    double edit_displacement = 0.03;
    int edit_max_steps = 100;
  } grids;

  std::vector<std::string> metrics = {
      "rotation",   "translation", "scale",       "linearity",
      "planarity",  "scattering",  "smoothness",  "correlation",
      "interaction", "sensitive-region", "bias-probe"};

  struct Interaction {
    int contexts = 100;
    int max_pairs = 200;
    int all_pairs_limit = 16;
  } interaction;

  struct Attack {
    double eta = 0.01;
    int iterations = 20;
    int restarts = 3;
    std::string mode = "finite-difference";  // finite-difference | analytic
    double fd_step = 0.001;
    bool rotation = true;
    bool translation = true;
    int random_baseline = 50;  // random transforms per cloud for the baseline
  } attack;

  struct Train {
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 0.1;
    double lr_decay = 0.95;
    bool aug_translation = false;
    bool aug_scale = false;
    bool aug_rotation_y = false;
    bool aug_rotation_random = false;
    int adversarial_iterations = 5;  // attack steps per sample in adv-train
    std::string init_weights;        // start from these instead of random init
    std::string weights_out = "weights.json";
  } train;

  struct Analysis {
    int max_clouds = 20;
    std::string reward = "classification";  // classification | projection
  } analysis;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
  std::string to_json_text() const;

  // Derived views.
  TrainConfig train_config() const;
  AttackConfig attack_config() const;
  EditConfig edit_config() const;
  ShapleyConfig shapley_config() const;
  InteractionConfig interaction_config() const;
  RewardKind reward_kind() const;
};

}  // namespace pointprobe
