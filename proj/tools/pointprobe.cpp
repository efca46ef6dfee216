#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pointprobe/analysis.hpp"
#include "pointprobe/errors.hpp"
#include "pointprobe/external_oracle.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string oracle_cmd;
  std::string metrics_csv;
  std::string out_dir;
  long long seed = -1;
  int workers = 0;
  int permutations = 0;
  int regions = 0;
};

void add_common_flags(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "JSON run configuration");
  sub->add_option("--seed", flags.seed, "master seed (overrides config)");
  sub->add_option("--workers", flags.workers,
                  "worker threads (overrides config and POINTPROBE_WORKERS)");
  sub->add_option("--oracle-cmd", flags.oracle_cmd,
                  "external model command (switches oracle to external mode)");
  sub->add_option("--permutations", flags.permutations,
                  "Shapley permutations per estimate");
  sub->add_option("--regions", flags.regions, "regions per cloud");
  sub->add_option("--metrics", flags.metrics_csv, "comma-separated metric list");
  sub->add_option("--out", flags.out_dir, "output directory");
}

pointprobe::RunConfig resolve_config(const CommonFlags& flags) {
  pointprobe::RunConfig cfg = flags.config_path.empty()
                                  ? pointprobe::RunConfig{}
                                  : pointprobe::RunConfig::from_file(flags.config_path);
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.workers > 0) {
    cfg.workers = flags.workers;
  } else if (const char* env = std::getenv("POINTPROBE_WORKERS")) {
    const int value = std::atoi(env);
    if (value > 0) cfg.workers = value;
  }
  if (!flags.oracle_cmd.empty()) {
    cfg.oracle.kind = "external";
    cfg.oracle.command = flags.oracle_cmd;
  }
  if (flags.permutations > 0) cfg.shapley.permutations = flags.permutations;
  if (flags.regions > 0) cfg.partition.regions = flags.regions;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.metrics_csv.empty()) {
    cfg.metrics.clear();
    std::stringstream ss(flags.metrics_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) cfg.metrics.push_back(item);
    // Re-validate the edited config through the schema path.
    cfg = pointprobe::RunConfig::from_json_text(cfg.to_json_text());
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"representation-quality analysis for black-box point-cloud models"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string serve_weights;
  std::string report_dir;

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  CLI::App* trn = app.add_subcommand("train", "train the built-in classifier");
  CLI::App* adv =
      app.add_subcommand("adv-train", "adversarially train the built-in classifier");
  CLI::App* ana = app.add_subcommand("analyze", "run the metric suite");
  CLI::App* atk = app.add_subcommand("attack", "run transform-space attacks");
  CLI::App* rep = app.add_subcommand("report", "print a bundle summary");
  CLI::App* srv =
      app.add_subcommand("serve", "serve built-in weights over the wire protocol");
  for (CLI::App* sub : {gen, trn, adv, ana, atk}) add_common_flags(sub, flags);
  rep->add_option("--out", report_dir, "bundle directory")->required();
  srv->add_option("--weights", serve_weights, "weight file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (srv->parsed()) {
      const auto model = pointprobe::BuiltinClassifier::load(serve_weights);
      pointprobe::run_oracle_server(model, std::cin, std::cout);
      return 0;
    }
    if (rep->parsed()) return pointprobe::cmd_report(report_dir, std::cout);

    const pointprobe::RunConfig cfg = resolve_config(flags);
    if (gen->parsed()) return pointprobe::cmd_gen_data(cfg);
    if (trn->parsed()) return pointprobe::cmd_train(cfg, false);
    if (adv->parsed()) return pointprobe::cmd_train(cfg, true);
    if (ana->parsed()) return pointprobe::cmd_analyze(cfg);
    if (atk->parsed()) return pointprobe::cmd_attack_run(cfg);
  } catch (const pointprobe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pointprobe::OracleError& e) {
    std::cerr << "oracle error: " << e.what() << "\n";
    return 3;
  } catch (const pointprobe::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pointprobe::IoError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pointprobe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
