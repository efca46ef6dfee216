#include "pointprobe/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pointprobe/errors.hpp"
#include "pointprobe/rng.hpp"

namespace pointprobe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

json spec_json(const TransformSpec& t) {
  json out;
  out["kind"] = transform_kind_name(t.kind);
  switch (t.kind) {
    case TransformKind::rotation: out["theta"] = vec3_json(t.theta); break;
    case TransformKind::translation: out["delta"] = vec3_json(t.delta); break;
    case TransformKind::scale: out["alpha"] = t.alpha; break;
    case TransformKind::structure_edit: out["step"] = t.edit_ref; break;
    case TransformKind::identity: break;
  }
  return out;
}

}  // namespace

PreparedCloud prepare_cloud(const PointCloud& raw, int regions,
                            double neighbor_radius) {
  PreparedCloud out;
  out.cloud = normalize(raw);
  out.part = partition(out.cloud, farthest_point_sample(out.cloud, regions));
  out.graph = build_neighbor_graph(
      out.part, out.cloud,
      neighbor_radius > 0.0 ? std::optional<double>(neighbor_radius) : std::nullopt);
  return out;
}

std::vector<PointCloud> family_clouds(const PreparedCloud& prepared,
                                      const std::string& family,
                                      const RunConfig::Grids& grids,
                                      std::vector<TransformSpec>* specs_out) {
  std::vector<PointCloud> clouds;
  std::vector<TransformSpec> specs;
  if (family == "rotation" || family == "translation" || family == "scale") {
    TransformGrid grid;
    if (family == "rotation")
      grid = TransformGrid::rotation(grids.rotation_per_axis);
    else if (family == "translation")
      grid = TransformGrid::translation(grids.translation_per_axis);
    else
      grid = TransformGrid::scale(grids.scale_count);
    for (const auto& spec : grid.specs) {
      clouds.push_back(apply_transform(prepared.cloud, spec));
      specs.push_back(spec);
    }
  } else if (family == "linearity" || family == "planarity" ||
             family == "scattering") {
    StructureTarget target = StructureTarget::linearity;
    if (family == "planarity") target = StructureTarget::planarity;
    if (family == "scattering") target = StructureTarget::scattering;
    EditConfig cfg;
    cfg.eta = grids.edit_eta;
    cfg.gamma = grids.edit_gamma;
    cfg.max_displacement = grids.edit_displacement;
    cfg.max_steps = grids.edit_max_steps;
    clouds = structure_transform_family(prepared.cloud, prepared.part, target, cfg,
                                        grids.structure_max_per_direction);
    specs.push_back(TransformSpec::identity());
    for (std::size_t k = 1; k < clouds.size(); ++k)
      specs.push_back(TransformSpec::structure_edit(static_cast<int>(k)));
  } else {
    throw ArgumentError("unknown transform family: " + family);
  }
  if (specs_out) *specs_out = std::move(specs);
  return clouds;
}

FamilyData analyze_family(const ModelOracle& oracle, const std::string& family,
                          const std::vector<PreparedCloud>& clouds,
                          const RunConfig::Grids& grids, const ShapleyConfig& shapley,
                          RewardKind reward, std::uint64_t seed) {
  FamilyData data;
  data.family = family;
  std::vector<CloudSensitivity> sensitivities;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const PreparedCloud& prepared = clouds[c];
    RewardSpec spec;
    spec.kind = reward;
    if (reward == RewardKind::classification_logit) {
      if (!prepared.cloud.label.has_value())
        throw ArgumentError("classification reward needs labeled clouds (" +
                            prepared.cloud.id + ")");
      spec.label = *prepared.cloud.label;
    }
    std::vector<TransformSpec> specs;
    const std::vector<PointCloud> transformed =
        family_clouds(prepared, family, grids, &specs);
    const std::uint64_t table_seed =
        substream(seed, "shapley", static_cast<std::uint64_t>(c),
                  seed_tag(family));
    data.tables.push_back(attribution_table(oracle, spec, prepared.part, transformed,
                                            specs, shapley, table_seed, family));
    sensitivities.push_back(
        sensitivity_from_table(data.tables.back(), prepared.cloud.id));
  }
  data.sensitivity = aggregate_sensitivity(family, std::move(sensitivities));
  return data;
}

std::unique_ptr<ModelOracle> make_oracle(const RunConfig& cfg) {
  if (cfg.oracle.kind == "external") {
    ExternalOracleConfig ext;
    ext.command = cfg.oracle.command;
    ext.procs = cfg.oracle.procs;
    ext.timeout_ms = cfg.oracle.timeout_ms;
    if (ext.command.empty())
      throw ConfigError("oracle.kind is 'external' but oracle.command is empty");
    return std::make_unique<ExternalOracle>(ext);
  }
  if (cfg.oracle.weights.empty())
    throw ConfigError("oracle.kind is 'builtin' but oracle.weights is empty");
  return std::make_unique<BuiltinClassifier>(BuiltinClassifier::load(cfg.oracle.weights));
}

SyntheticDataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.kind == "synthetic") {
    return generate_dataset(cfg.dataset.classes, cfg.dataset.per_class,
                            cfg.dataset.points, substream(cfg.seed, "dataset"),
                            cfg.dataset.train_fraction);
  }
  // Directory datasets follow the gen-data layout: clouds/*.txt + manifest.
  const fs::path dir = cfg.dataset.dir;
  const json manifest = json::parse(read_text_file(dir / "manifest.json"));
  SyntheticDataset data;
  data.class_names = manifest.at("classes").get<std::vector<std::string>>();
  data.points = manifest.at("points").get<int>();
  data.seed = manifest.at("seed").get<std::uint64_t>();
  for (const auto& sample : manifest.at("samples")) {
    PointCloud cloud = load_cloud_text((dir / sample.at("file").get<std::string>()).string());
    cloud.label = sample.at("label").get<int>();
    cloud.id = sample.at("id").get<std::string>();
    if (sample.at("split").get<std::string>() == "train")
      data.train.push_back(std::move(cloud));
    else
      data.test.push_back(std::move(cloud));
  }
  return data;
}

namespace {

std::vector<PreparedCloud> prepare_test_clouds(const RunConfig& cfg,
                                               const SyntheticDataset& data) {
  const auto& pool = data.test.empty() ? data.train : data.test;
  if (pool.empty()) throw ConfigError("dataset has no clouds to analyze");
  const int count = std::min<int>(cfg.analysis.max_clouds, static_cast<int>(pool.size()));
  std::vector<PreparedCloud> prepared;
  prepared.reserve(count);
  for (int c = 0; c < count; ++c)
    prepared.push_back(
        prepare_cloud(pool[c], cfg.partition.regions, cfg.partition.neighbor_radius));
  return prepared;
}

std::string sensitivity_csv(const SensitivityResult& result) {
  std::string csv = "sample_id,region,metric,a_i,Z\n";
  for (const auto& cloud : result.clouds)
    for (std::size_t i = 0; i < cloud.regions.size(); ++i)
      csv += cloud.sample_id + "," + std::to_string(i) + "," + result.family + "," +
             fmt_double(cloud.regions[i].a) + "," + fmt_double(cloud.z) + "\n";
  return csv;
}

std::string phi_csv(const FamilyData& data) {
  std::string csv =
      "sample_id,transform_index,transform,region,phi,se,v_full,v_empty\n";
  for (std::size_t c = 0; c < data.tables.size(); ++c) {
    const AttributionTable& table = data.tables[c];
    const std::string& sample = data.sensitivity.clouds[c].sample_id;
    for (int t = 0; t < table.transforms(); ++t)
      for (int i = 0; i < table.regions(); ++i)
        csv += sample + "," + std::to_string(t) + "," + table.specs[t].describe() +
               "," + std::to_string(i) + "," + fmt_double(table.phi[t][i]) + "," +
               fmt_double(table.se[t][i]) + "," + fmt_double(table.v_full[t]) + "," +
               fmt_double(table.v_empty[t]) + "\n";
  }
  return csv;
}

std::string heatmap_csv(const PreparedCloud& prepared, const CloudSensitivity& sens) {
  std::string csv = "x,y,z,region,value\n";
  for (int p = 0; p < prepared.cloud.size(); ++p) {
    const int r = prepared.part.assignment[p];
    const Vec3& q = prepared.cloud.points[p];
    csv += fmt_double(q[0]) + "," + fmt_double(q[1]) + "," + fmt_double(q[2]) + "," +
           std::to_string(r) + "," + fmt_double(sens.regions[r].a) + "\n";
  }
  return csv;
}

json mean_std_json(double mean, double stddev) {
  return json{{"mean", mean}, {"std", stddev}};
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
  const SyntheticDataset data = load_dataset(cfg);
  const fs::path dir = cfg.dataset.dir.empty() ? fs::path(cfg.out_dir) / "dataset"
                                               : fs::path(cfg.dataset.dir);
  json samples = json::array();
  auto dump_split = [&](const std::vector<PointCloud>& clouds, const char* split) {
    for (const auto& cloud : clouds) {
      const std::string file = "clouds/" + cloud.id + ".txt";
      save_cloud_text(cloud, (dir / file).string());
      samples.push_back({{"file", file},
                         {"id", cloud.id},
                         {"label", *cloud.label},
                         {"split", split}});
    }
  };
  fs::create_directories(dir / "clouds");
  dump_split(data.train, "train");
  dump_split(data.test, "test");

  json manifest;
  manifest["version"] = 1;
  manifest["seed"] = data.seed;
  manifest["classes"] = data.class_names;
  manifest["points"] = data.points;
  manifest["samples"] = std::move(samples);
  write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
  std::cout << "wrote " << manifest["samples"].size() << " clouds to " << dir
            << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool adversarial) {
  const SyntheticDataset data = load_dataset(cfg);
  const int classes = static_cast<int>(data.class_names.size());
  BuiltinClassifier model =
      cfg.train.init_weights.empty()
          ? BuiltinClassifier(classes, substream(cfg.seed, "init"))
          : BuiltinClassifier::load(cfg.train.init_weights);
  const TrainConfig train_cfg = cfg.train_config();

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "resolved_config.json", cfg.to_json_text() + "\n");

  std::string log = adversarial
                        ? "epoch,train_loss,test_accuracy,adversarial_accuracy\n"
                        : "epoch,train_loss,test_accuracy\n";
  json report;
  if (adversarial) {
    AttackConfig attack = cfg.attack_config();
    attack.iterations = cfg.train.adversarial_iterations;
    attack.restarts = 1;
    const AdvTrainReport result =
        adversarial_train(model, data, train_cfg, attack, substream(cfg.seed, "train"));
    for (std::size_t e = 0; e < result.epochs.size(); ++e)
      log += std::to_string(e) + "," + fmt_double(result.epochs[e].train_loss) + "," +
             fmt_double(result.epochs[e].clean_accuracy) + "," +
             fmt_double(result.epochs[e].adversarial_accuracy) + "\n";
    report["final_test_accuracy"] = result.final_clean_accuracy;
    report["final_adversarial_accuracy"] = result.final_adversarial_accuracy;
    std::cout << "adversarial training done; clean accuracy "
              << result.final_clean_accuracy << ", adversarial accuracy "
              << result.final_adversarial_accuracy << "\n";
  } else {
    const TrainReport result = train(model, data, train_cfg, substream(cfg.seed, "train"));
    for (std::size_t e = 0; e < result.epochs.size(); ++e)
      log += std::to_string(e) + "," + fmt_double(result.epochs[e].train_loss) + "," +
             fmt_double(result.epochs[e].test_accuracy) + "\n";
    report["final_test_accuracy"] = result.final_test_accuracy;
    std::cout << "training done; test accuracy " << result.final_test_accuracy << "\n";
  }

  const fs::path weights_path = out_dir / cfg.train.weights_out;
  model.save(weights_path.string());
  write_text_file(out_dir / "accuracy_log.csv", log);
  report["weights"] = weights_path.string();
  report["epochs"] = cfg.train.epochs;
  write_text_file(out_dir / "train_report.json", report.dump(1) + "\n");
  return 0;
}

int cmd_analyze(const RunConfig& cfg) {
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "resolved_config.json", cfg.to_json_text() + "\n");

  const std::unique_ptr<ModelOracle> oracle = make_oracle(cfg);
  const SyntheticDataset data = load_dataset(cfg);
  const std::vector<PreparedCloud> prepared = prepare_test_clouds(cfg, data);
  const RewardKind reward = cfg.reward_kind();
  const ShapleyConfig shapley = cfg.shapley_config();

  json provenance;
  provenance["version"] = kToolVersion;
  provenance["seed"] = cfg.seed;
  provenance["workers"] = cfg.workers;
  provenance["oracle"] = cfg.oracle.kind;
  provenance["oracle_hash"] =
      cfg.oracle.kind == "builtin"
          ? fnv1a_hash(read_text_file(cfg.oracle.weights))
          : fnv1a_hash(cfg.oracle.command);
  provenance["clouds"] = static_cast<int>(prepared.size());
  write_text_file(out_dir / "provenance.json", provenance.dump(1) + "\n");

  const std::set<std::string> requested(cfg.metrics.begin(), cfg.metrics.end());
  std::map<std::string, std::string> errors;
  std::map<std::string, FamilyData> families;

  const std::vector<std::string> family_names{"rotation",  "translation",
                                              "scale",     "linearity",
                                              "planarity", "scattering"};
  auto family_needed = [&](const std::string& f) {
    if (requested.count(f)) return true;
    if ((f == "rotation" || f == "translation") && requested.count("smoothness"))
      return true;
    if ((f == "rotation" || f == "translation" || f == "scale") &&
        requested.count("correlation"))
      return true;
    if (f == "rotation" && requested.count("sensitive-region")) return true;
    return false;
  };

  for (const auto& family : family_names) {
    if (!family_needed(family)) continue;
    try {
      families.emplace(family, analyze_family(*oracle, family, prepared, cfg.grids,
                                              shapley, reward, cfg.seed));
    } catch (const Error& e) {
      errors["sensitivity:" + family] = e.what();
    }
  }

  json summary;
  summary["provenance"] = provenance;

  // Per-family exports; the requested subset controls the sensitivity tables.
  for (const auto& [family, data_f] : families) {
    write_text_file(out_dir / ("phi_" + family + ".csv"), phi_csv(data_f));
    if (!requested.count(family)) continue;
    write_text_file(out_dir / ("sensitivity_" + family + ".csv"),
                    sensitivity_csv(data_f.sensitivity));
    for (std::size_t c = 0; c < prepared.size(); ++c)
      write_text_file(
          out_dir / ("heatmap_" + family + "_" + prepared[c].cloud.id + ".csv"),
          heatmap_csv(prepared[c], data_f.sensitivity.clouds[c]));
    summary["sensitivity"][family] =
        mean_std_json(data_f.sensitivity.mean, data_f.sensitivity.stddev);
  }

  // Base-cloud attributions (identity transform), one estimate per cloud.
  try {
    json attributions = json::array();
    for (std::size_t c = 0; c < prepared.size(); ++c) {
      RewardSpec spec;
      spec.kind = reward;
      if (reward == RewardKind::classification_logit)
        spec.label = prepared[c].cloud.label.value();
      GameContext ctx =
          make_oracle_context(*oracle, prepared[c].cloud, prepared[c].part, spec,
                              cfg.workers);
      const std::uint64_t run_seed =
          substream(cfg.seed, "shapley", static_cast<std::uint64_t>(c),
                    seed_tag("identity"));
      const AttributionResult result =
          shapley.exact ? exact_shapley(ctx)
                        : sampled_shapley(ctx, shapley.permutations, run_seed);
      json entry = json::parse(attribution_to_json(result));
      entry["sample_id"] = prepared[c].cloud.id;
      attributions.push_back(std::move(entry));
    }
    write_text_file(out_dir / "attributions.json", attributions.dump(1) + "\n");
    summary["attribution_mode"] = shapley.exact ? "exact" : "sampled";
  } catch (const Error& e) {
    errors["attributions"] = e.what();
  }

  if (requested.count("smoothness")) {
    for (const std::string family : {"rotation", "translation"}) {
      const auto it = families.find(family);
      if (it == families.end()) {
        errors["smoothness:" + family] = "family tables unavailable";
        continue;
      }
      try {
        std::vector<NeighborGraph> graphs;
        std::vector<std::string> ids;
        for (const auto& p : prepared) {
          graphs.push_back(p.graph);
          ids.push_back(p.cloud.id);
        }
        const SmoothnessResult result =
            non_smoothness(family, it->second.tables, graphs, ids);
        summary["non_smoothness"][family] = mean_std_json(result.mean, result.stddev);
        json per_cloud = json::array();
        for (std::size_t c = 0; c < result.per_cloud.size(); ++c)
          per_cloud.push_back({{"sample_id", ids[c]},
                               {"value", result.per_cloud[c]},
                               {"z_smooth", result.z_smooth[c]}});
        summary["non_smoothness"][family]["per_cloud"] = std::move(per_cloud);
      } catch (const Error& e) {
        errors["smoothness:" + family] = e.what();
      }
    }
  }

  if (requested.count("correlation")) {
    std::string csv = "family,sample_id,r\n";
    for (const std::string family : {"rotation", "translation", "scale"}) {
      const auto it = families.find(family);
      if (it == families.end()) {
        errors["correlation:" + family] = "family tables unavailable";
        continue;
      }
      try {
        const CorrelationResult result = attribution_sensitivity_correlation(
            family, it->second.tables, it->second.sensitivity.clouds);
        summary["correlation"][family] = mean_std_json(result.mean, result.stddev);
        summary["correlation"][family]["excluded"] = result.excluded_clouds;
        std::size_t k = 0;
        for (std::size_t c = 0; c < prepared.size(); ++c) {
          if (std::find(result.excluded_clouds.begin(), result.excluded_clouds.end(),
                        static_cast<int>(c)) != result.excluded_clouds.end())
            continue;
          csv += family + "," + prepared[c].cloud.id + "," +
                 fmt_double(result.per_cloud_r[k++]) + "\n";
        }
      } catch (const Error& e) {
        errors["correlation:" + family] = e.what();
      }
    }
    write_text_file(out_dir / "correlations.csv", csv);
  }

  // Shared per-cloud games: interaction metrics reuse one memo per cloud.
  std::vector<std::unique_ptr<GameContext>> games;
  auto ensure_games = [&] {
    if (!games.empty()) return;
    for (const auto& p : prepared) {
      RewardSpec spec;
      spec.kind = reward;
      if (reward == RewardKind::classification_logit) spec.label = p.cloud.label.value();
      games.push_back(std::make_unique<GameContext>(
          std::make_shared<OracleGame>(*oracle, p.cloud, p.part, spec, cfg.workers)));
    }
  };
  auto game_ptrs = [&] {
    std::vector<GameContext*> ptrs;
    for (auto& g : games) ptrs.push_back(g.get());
    return ptrs;
  };

  if (requested.count("interaction")) {
    try {
      ensure_games();
      const InteractionProfile profile = order_profile(
          game_ptrs(), cfg.interaction_config(), substream(cfg.seed, "interaction"));
      write_text_file(out_dir / "interaction_profile.json",
                      interaction_profile_to_json(profile) + "\n");
      std::string csv = "sample_id,order,i,j,value,se,contexts\n";
      for (std::size_t c = 0; c < profile.per_pair.size(); ++c)
        for (std::size_t oi = 0; oi < profile.orders.size(); ++oi)
          for (std::size_t k = 0; k < profile.cloud_pairs[c].size(); ++k)
            csv += prepared[c].cloud.id + "," + std::to_string(profile.orders[oi]) +
                   "," + std::to_string(profile.cloud_pairs[c][k].first) + "," +
                   std::to_string(profile.cloud_pairs[c][k].second) + "," +
                   fmt_double(profile.per_pair[c][oi][k]) + "," +
                   fmt_double(profile.per_pair_se[c][oi][k]) + "," +
                   std::to_string(profile.contexts_per_pair) + "\n";
      write_text_file(out_dir / "interaction_pairs.csv", csv);
      summary["interaction"] = {{"orders", profile.orders},
                                {"values", profile.values},
                                {"normalized_orders", profile.normalized_orders}};
    } catch (const Error& e) {
      errors["interaction"] = e.what();
    }
  }

  if (requested.count("sensitive-region")) {
    const auto it = families.find("rotation");
    if (it == families.end()) {
      errors["sensitive-region"] = "rotation family tables unavailable";
    } else {
      try {
        ensure_games();
        std::vector<int> focus;
        std::vector<std::vector<int>> neighbors;
        json picks = json::array();
        for (std::size_t c = 0; c < prepared.size(); ++c) {
          const SensitiveRegionPick pick = most_sensitive_region(
              it->second.tables[c], it->second.sensitivity.clouds[c]);
          focus.push_back(pick.region);
          neighbors.push_back(prepared[c].graph.neighbors[pick.region]);
          picks.push_back({{"sample_id", prepared[c].cloud.id},
                           {"region", pick.region},
                           {"t_max", spec_json(pick.t_max)},
                           {"t_min", spec_json(pick.t_min)}});
        }
        const InteractionProfile profile = sensitive_region_profile(
            game_ptrs(), focus, neighbors, cfg.interaction_config(),
            substream(cfg.seed, "interaction"));
        json doc = json::parse(interaction_profile_to_json(profile));
        doc["picks"] = std::move(picks);
        write_text_file(out_dir / "sensitive_region_profile.json", doc.dump(1) + "\n");
        summary["sensitive_region"] = {{"orders", profile.orders},
                                       {"values", profile.values}};
      } catch (const Error& e) {
        errors["sensitive-region"] = e.what();
      }
    }
  }

  if (requested.count("bias-probe")) {
    try {
      const BiasProbeResult probe = bias_probe(*oracle, cfg.dataset.points);
      json doc;
      doc["probs"] = probe.probs;
      doc["top_class"] = probe.top_class;
      doc["top_prob"] = probe.top_prob;
      doc["biased"] = probe.biased;
      write_text_file(out_dir / "bias_probe.json", doc.dump(1) + "\n");
      summary["bias_probe"] = std::move(doc);
    } catch (const Error& e) {
      errors["bias-probe"] = e.what();
    }
  }

  json error_doc = json::object();
  for (const auto& [key, msg] : errors) error_doc[key] = msg;
  summary["errors"] = error_doc;
  write_text_file(out_dir / "summary.json", summary.dump(1) + "\n");

  if (!errors.empty()) {
    for (const auto& [key, msg] : errors)
      std::cerr << "metric failed: " << key << ": " << msg << "\n";
    return 4;
  }
  return 0;
}

int cmd_attack_run(const RunConfig& cfg) {
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "resolved_config.json", cfg.to_json_text() + "\n");

  const std::unique_ptr<ModelOracle> oracle = make_oracle(cfg);
  const SyntheticDataset data = load_dataset(cfg);
  std::vector<PointCloud> clouds = data.test.empty() ? data.train : data.test;
  if (static_cast<int>(clouds.size()) > cfg.analysis.max_clouds)
    clouds.resize(cfg.analysis.max_clouds);
  const AttackConfig attack = cfg.attack_config();

  int flips = 0, baseline_flips = 0;
  json traces = json::array();
  std::string csv = "sample_id,flipped,loss,baseline_flipped,baseline_loss\n";
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const PointCloud cloud = normalize(clouds[c]);
    if (!cloud.label.has_value())
      throw ConfigError("attack needs labeled clouds (" + cloud.id + ")");
    const AttackResult result =
        adversarial_transform(*oracle, cloud, *cloud.label, attack,
                              substream(cfg.seed, "attack", static_cast<std::uint64_t>(c)));

    // Random-search baseline from the same parameter box.
    Rng rng(substream(cfg.seed, "attack-baseline", static_cast<std::uint64_t>(c)));
    double baseline_loss = -1.0;
    Vec3 base_theta = Vec3::Zero(), base_delta = Vec3::Zero();
    for (int k = 0; k < cfg.attack.random_baseline; ++k) {
      Vec3 theta = Vec3::Zero(), delta = Vec3::Zero();
      if (attack.attack_rotation)
        for (int a = 0; a < 3; ++a) theta[a] = rng.uniform(-kRotationBound, kRotationBound);
      if (attack.attack_translation)
        for (int a = 0; a < 3; ++a)
          delta[a] = rng.uniform(-kTranslationBound, kTranslationBound);
      const double loss = attack_loss(*oracle, cloud, theta, delta, *cloud.label);
      if (loss > baseline_loss) {
        baseline_loss = loss;
        base_theta = theta;
        base_delta = delta;
      }
    }
    bool baseline_flipped = false;
    if (cfg.attack.random_baseline > 0) {
      const auto probs =
          oracle->evaluate({apply_attack_params(cloud, base_theta, base_delta)}).at(0);
      const int pred = static_cast<int>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
      baseline_flipped = pred != *cloud.label;
    }

    flips += result.flipped ? 1 : 0;
    baseline_flips += baseline_flipped ? 1 : 0;

    json trace = json::array();
    for (std::size_t t = 0; t < result.trajectory.size(); ++t)
      trace.push_back({{"iter", static_cast<int>(t)},
                       {"theta", vec3_json(result.trajectory[t].theta)},
                       {"delta", vec3_json(result.trajectory[t].delta)},
                       {"loss", result.trajectory[t].loss}});
    traces.push_back({{"sample_id", cloud.id},
                      {"label", *cloud.label},
                      {"flipped", result.flipped},
                      {"plateau", result.plateau},
                      {"loss", result.loss},
                      {"theta", vec3_json(result.theta)},
                      {"delta", vec3_json(result.delta)},
                      {"baseline_loss", baseline_loss},
                      {"baseline_flipped", baseline_flipped},
                      {"trace", std::move(trace)}});
    csv += cloud.id + "," + (result.flipped ? "1" : "0") + "," +
           fmt_double(result.loss) + "," + (baseline_flipped ? "1" : "0") + "," +
           fmt_double(baseline_loss) + "\n";
  }

  write_text_file(out_dir / "attack_traces.json", traces.dump(1) + "\n");
  write_text_file(out_dir / "attack_summary.csv", csv);
  json summary;
  summary["clouds"] = static_cast<int>(clouds.size());
  summary["flip_rate"] = clouds.empty() ? 0.0 : static_cast<double>(flips) / clouds.size();
  summary["baseline_flip_rate"] =
      clouds.empty() ? 0.0 : static_cast<double>(baseline_flips) / clouds.size();
  write_text_file(out_dir / "attack_summary.json", summary.dump(1) + "\n");
  std::cout << "attack flip rate " << summary["flip_rate"] << " vs random baseline "
            << summary["baseline_flip_rate"] << "\n";
  return 0;
}

int cmd_report(const std::string& out_dir, std::ostream& out) {
  const fs::path dir(out_dir);
  const json summary = json::parse(read_text_file(dir / "summary.json"));
  out << "report bundle: " << out_dir << "\n";
  if (summary.contains("provenance"))
    out << "seed " << summary["provenance"]["seed"] << ", oracle "
        << summary["provenance"]["oracle"].get<std::string>() << ", clouds "
        << summary["provenance"]["clouds"] << "\n";
  if (summary.contains("sensitivity")) {
    out << "\nsensitivity (mean +- std over regions and clouds)\n";
    for (const auto& [family, stats] : summary["sensitivity"].items())
      out << "  " << family << ": " << stats["mean"].get<double>() << " +- "
          << stats["std"].get<double>() << "\n";
  }
  if (summary.contains("non_smoothness")) {
    out << "\nnon-smoothness of neighboring attributions\n";
    for (const auto& [family, stats] : summary["non_smoothness"].items())
      out << "  " << family << ": " << stats["mean"].get<double>() << " +- "
          << stats["std"].get<double>() << "\n";
  }
  if (summary.contains("correlation")) {
    out << "\nattribution-sensitivity Pearson correlation\n";
    for (const auto& [family, stats] : summary["correlation"].items())
      out << "  " << family << ": " << stats["mean"].get<double>() << " +- "
          << stats["std"].get<double>() << "\n";
  }
  if (summary.contains("interaction"))
    out << "\ninteraction orders: " << summary["interaction"]["orders"].size()
        << " (see interaction_profile.json)\n";
  if (summary.contains("bias_probe"))
    out << "\nempty-input bias: top class " << summary["bias_probe"]["top_class"]
        << " with p = " << summary["bias_probe"]["top_prob"]
        << (summary["bias_probe"]["biased"].get<bool>() ? " (biased)" : "") << "\n";
  if (summary.contains("errors") && !summary["errors"].empty()) {
    out << "\nfailed metrics:\n";
    for (const auto& [key, msg] : summary["errors"].items())
      out << "  " << key << ": " << msg.get<std::string>() << "\n";
  }
  return 0;
}

std::vector<RecipeOutcome> augmentation_comparison(
    const std::vector<RecipeSpec>& recipes, const SyntheticDataset& data,
    const TrainConfig& base_train, const AttackConfig& attack,
    const std::vector<std::string>& families, int regions,
    const ShapleyConfig& shapley, const RunConfig::Grids& grids, int max_clouds,
    std::uint64_t seed) {
  if (recipes.empty()) throw ArgumentError("augmentation comparison needs recipes");
  const int classes = static_cast<int>(data.class_names.size());

  std::vector<PreparedCloud> prepared;
  const auto& pool = data.test.empty() ? data.train : data.test;
  const int count = std::min<int>(max_clouds, static_cast<int>(pool.size()));
  for (int c = 0; c < count; ++c) prepared.push_back(prepare_cloud(pool[c], regions));

  std::vector<RecipeOutcome> outcomes;
  for (const RecipeSpec& recipe : recipes) {
    BuiltinClassifier model(classes, substream(seed, "init"));
    TrainConfig train_cfg = base_train;
    train_cfg.augmentation = recipe.augmentation;
    RecipeOutcome outcome;
    outcome.name = recipe.name;
    if (recipe.adversarial) {
      const AdvTrainReport report =
          adversarial_train(model, data, train_cfg, attack, substream(seed, "train"));
      outcome.test_accuracy = report.final_clean_accuracy;
    } else {
      const TrainReport report = train(model, data, train_cfg, substream(seed, "train"));
      outcome.test_accuracy = report.final_test_accuracy;
    }
    for (const auto& family : families) {
      const FamilyData fd =
          analyze_family(model, family, prepared, grids, shapley,
                         RewardKind::classification_logit, seed);
      outcome.sensitivity[family] = {fd.sensitivity.mean, fd.sensitivity.stddev};
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace pointprobe
