#include "pointprobe/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pointprobe/errors.hpp"

namespace pointprobe {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("config section '" + section + "' must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + section + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for config key '" + std::string(key) +
                      "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  check_keys(doc, "<root>",
             {"seed", "workers", "out_dir", "dataset", "oracle", "partition",
              "shapley", "grids", "metrics", "interaction", "attack", "train",
              "analysis"});

  RunConfig cfg;
  read(doc, "seed", cfg.seed);
  read(doc, "workers", cfg.workers);
  read(doc, "out_dir", cfg.out_dir);
  read(doc, "metrics", cfg.metrics);

  if (doc.contains("dataset")) {
    const json& d = doc["dataset"];
    check_keys(d, "dataset",
               {"kind", "classes", "per_class", "points", "train_fraction", "dir"});
    read(d, "kind", cfg.dataset.kind);
    read(d, "classes", cfg.dataset.classes);
    read(d, "per_class", cfg.dataset.per_class);
    read(d, "points", cfg.dataset.points);
    read(d, "train_fraction", cfg.dataset.train_fraction);
    read(d, "dir", cfg.dataset.dir);
  }
  if (doc.contains("oracle")) {
    const json& o = doc["oracle"];
    check_keys(o, "oracle", {"kind", "weights", "command", "procs", "timeout_ms"});
    read(o, "kind", cfg.oracle.kind);
    read(o, "weights", cfg.oracle.weights);
    read(o, "command", cfg.oracle.command);
    read(o, "procs", cfg.oracle.procs);
    read(o, "timeout_ms", cfg.oracle.timeout_ms);
  }
  if (doc.contains("partition")) {
    const json& p = doc["partition"];
    check_keys(p, "partition", {"regions", "neighbor_radius"});
    read(p, "regions", cfg.partition.regions);
    read(p, "neighbor_radius", cfg.partition.neighbor_radius);
  }
  if (doc.contains("shapley")) {
    const json& s = doc["shapley"];
    check_keys(s, "shapley", {"permutations", "exact", "shared_permutations"});
    read(s, "permutations", cfg.shapley.permutations);
    read(s, "exact", cfg.shapley.exact);
    read(s, "shared_permutations", cfg.shapley.shared_permutations);
  }
  if (doc.contains("grids")) {
    const json& g = doc["grids"];
    check_keys(g, "grids",
               {"rotation_per_axis", "translation_per_axis", "scale_count",
                "structure_max_per_direction", "edit_eta", "edit_gamma",
                "edit_displacement", "edit_max_steps"});
    read(g, "rotation_per_axis", cfg.grids.rotation_per_axis);
    read(g, "translation_per_axis", cfg.grids.translation_per_axis);
    read(g, "scale_count", cfg.grids.scale_count);
    read(g, "structure_max_per_direction", cfg.grids.structure_max_per_direction);
    read(g, "edit_eta", cfg.grids.edit_eta);
    read(g, "edit_gamma", cfg.grids.edit_gamma);
    read(g, "edit_displacement", cfg.grids.edit_displacement);
    read(g, "edit_max_steps", cfg.grids.edit_max_steps);
  }
  if (doc.contains("interaction")) {
    const json& i = doc["interaction"];
    check_keys(i, "interaction", {"contexts", "max_pairs", "all_pairs_limit"});
    read(i, "contexts", cfg.interaction.contexts);
    read(i, "max_pairs", cfg.interaction.max_pairs);
    read(i, "all_pairs_limit", cfg.interaction.all_pairs_limit);
  }
  if (doc.contains("attack")) {
    const json& a = doc["attack"];
    check_keys(a, "attack",
               {"eta", "iterations", "restarts", "mode", "fd_step", "rotation",
                "translation", "random_baseline"});
    read(a, "eta", cfg.attack.eta);
    read(a, "iterations", cfg.attack.iterations);
    read(a, "restarts", cfg.attack.restarts);
    read(a, "mode", cfg.attack.mode);
    read(a, "fd_step", cfg.attack.fd_step);
    read(a, "rotation", cfg.attack.rotation);
    read(a, "translation", cfg.attack.translation);
    read(a, "random_baseline", cfg.attack.random_baseline);
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    check_keys(t, "train",
               {"epochs", "batch_size", "learning_rate", "lr_decay", "aug_translation",
                "aug_scale", "aug_rotation_y", "aug_rotation_random",
                "adversarial_iterations", "init_weights", "weights_out"});
    read(t, "epochs", cfg.train.epochs);
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "lr_decay", cfg.train.lr_decay);
    read(t, "aug_translation", cfg.train.aug_translation);
    read(t, "aug_scale", cfg.train.aug_scale);
    read(t, "aug_rotation_y", cfg.train.aug_rotation_y);
    read(t, "aug_rotation_random", cfg.train.aug_rotation_random);
    read(t, "adversarial_iterations", cfg.train.adversarial_iterations);
    read(t, "init_weights", cfg.train.init_weights);
    read(t, "weights_out", cfg.train.weights_out);
  }
  if (doc.contains("analysis")) {
    const json& a = doc["analysis"];
    check_keys(a, "analysis", {"max_clouds", "reward"});
    read(a, "max_clouds", cfg.analysis.max_clouds);
    read(a, "reward", cfg.analysis.reward);
  }

  // Cross-field validation.
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "directory")
    throw ConfigError("dataset.kind must be 'synthetic' or 'directory'");
  if (cfg.oracle.kind != "builtin" && cfg.oracle.kind != "external")
    throw ConfigError("oracle.kind must be 'builtin' or 'external'");
  if (cfg.partition.regions < 2 || cfg.partition.regions > 64)
    throw ConfigError("partition.regions must be in [2, 64]");
  if (cfg.shapley.permutations < 1)
    throw ConfigError("shapley.permutations must be >= 1");
  if (cfg.attack.mode != "finite-difference" && cfg.attack.mode != "analytic")
    throw ConfigError("attack.mode must be 'finite-difference' or 'analytic'");
  if (cfg.analysis.reward != "classification" && cfg.analysis.reward != "projection")
    throw ConfigError("analysis.reward must be 'classification' or 'projection'");
  static const std::set<std::string> known_metrics{
      "rotation",    "translation",      "scale",      "linearity",
      "planarity",   "scattering",       "smoothness", "correlation",
      "interaction", "sensitive-region", "bias-probe"};
  for (const auto& m : cfg.metrics)
    if (!known_metrics.count(m)) throw ConfigError("unknown metric '" + m + "'");
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
  json doc;
  doc["seed"] = seed;
  doc["workers"] = workers;
  doc["out_dir"] = out_dir;
  doc["dataset"] = {{"kind", dataset.kind},
                    {"classes", dataset.classes},
                    {"per_class", dataset.per_class},
                    {"points", dataset.points},
                    {"train_fraction", dataset.train_fraction},
                    {"dir", dataset.dir}};
  doc["oracle"] = {{"kind", oracle.kind},
                   {"weights", oracle.weights},
                   {"command", oracle.command},
                   {"procs", oracle.procs},
                   {"timeout_ms", oracle.timeout_ms}};
  doc["partition"] = {{"regions", partition.regions},
                      {"neighbor_radius", partition.neighbor_radius}};
  doc["shapley"] = {{"permutations", shapley.permutations},
                    {"exact", shapley.exact},
                    {"shared_permutations", shapley.shared_permutations}};
  doc["grids"] = {{"rotation_per_axis", grids.rotation_per_axis},
                  {"translation_per_axis", grids.translation_per_axis},
                  {"scale_count", grids.scale_count},
                  {"structure_max_per_direction", grids.structure_max_per_direction},
                  {"edit_eta", grids.edit_eta},
                  {"edit_gamma", grids.edit_gamma},
                  {"edit_displacement", grids.edit_displacement},
                  {"edit_max_steps", grids.edit_max_steps}};
  doc["metrics"] = metrics;
  doc["interaction"] = {{"contexts", interaction.contexts},
                        {"max_pairs", interaction.max_pairs},
                        {"all_pairs_limit", interaction.all_pairs_limit}};
  doc["attack"] = {{"eta", attack.eta},
                   {"iterations", attack.iterations},
                   {"restarts", attack.restarts},
                   {"mode", attack.mode},
                   {"fd_step", attack.fd_step},
                   {"rotation", attack.rotation},
                   {"translation", attack.translation},
                   {"random_baseline", attack.random_baseline}};
  doc["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"lr_decay", train.lr_decay},
                  {"aug_translation", train.aug_translation},
                  {"aug_scale", train.aug_scale},
                  {"aug_rotation_y", train.aug_rotation_y},
                  {"aug_rotation_random", train.aug_rotation_random},
                  {"adversarial_iterations", train.adversarial_iterations},
                  {"init_weights", train.init_weights},
                  {"weights_out", train.weights_out}};
  doc["analysis"] = {{"max_clouds", analysis.max_clouds},
                     {"reward", analysis.reward}};
  return doc.dump(1);
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.epochs = train.epochs;
  cfg.batch_size = train.batch_size;
  cfg.learning_rate = train.learning_rate;
  cfg.lr_decay = train.lr_decay;
  cfg.augmentation.translation = train.aug_translation;
  cfg.augmentation.scale = train.aug_scale;
  cfg.augmentation.rotation_y = train.aug_rotation_y;
  cfg.augmentation.rotation_random = train.aug_rotation_random;
  return cfg;
}

AttackConfig RunConfig::attack_config() const {
  AttackConfig cfg;
  cfg.eta = attack.eta;
  cfg.iterations = attack.iterations;
  cfg.restarts = attack.restarts;
  cfg.mode = attack.mode == "analytic" ? AttackGradientMode::analytic
                                       : AttackGradientMode::finite_difference;
  cfg.fd_step = attack.fd_step;
  cfg.attack_rotation = attack.rotation;
  cfg.attack_translation = attack.translation;
  return cfg;
}

EditConfig RunConfig::edit_config() const {
  EditConfig cfg;
  cfg.eta = grids.edit_eta;
  cfg.gamma = grids.edit_gamma;
  cfg.max_displacement = grids.edit_displacement;
  cfg.max_steps = grids.edit_max_steps;
  return cfg;
}

ShapleyConfig RunConfig::shapley_config() const {
  ShapleyConfig cfg;
  cfg.permutations = shapley.permutations;
  cfg.exact = shapley.exact;
  cfg.shared_permutations = shapley.shared_permutations;
  cfg.workers = workers;
  return cfg;
}

InteractionConfig RunConfig::interaction_config() const {
  InteractionConfig cfg;
  cfg.contexts = interaction.contexts;
  cfg.max_pairs = interaction.max_pairs;
  cfg.all_pairs_limit = interaction.all_pairs_limit;
  return cfg;
}

RewardKind RunConfig::reward_kind() const {
  return analysis.reward == "projection" ? RewardKind::embedding_projection
                                         : RewardKind::classification_logit;
}

}  // namespace pointprobe
