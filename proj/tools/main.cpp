#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "inpo/config.hpp"
#include "inpo/error.hpp"
#include "inpo/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config file (key=value lines)");
  cmd->add_option("--set", args.overrides, "override a config key, e.g. --set seed=3");
  cmd->add_flag("--force", args.force, "overwrite an existing run directory");
}

inpo::ExperimentConfig resolve_config(const CommonArgs& args, const std::string& graph,
                                      const std::string& out, std::int64_t seed) {
  inpo::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = inpo::load_config(args.config_path);
  if (!graph.empty()) cfg.graph = graph;
  if (!out.empty()) cfg.out_dir = out;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw inpo::ConfigError("--set expects key=value, got: " + kv);
    inpo::set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"influence-aware negative preference optimization for GNN edge unlearning"};
  app.require_subcommand(1);

  CommonArgs pretrain_args, unlearn_args, influence_args, eval_args, sweep_args;
  std::string graph, out, checkpoint, sweep_param;
  std::int64_t seed = -1;
  std::vector<std::string> sweep_values;
  int jobs = 1;

  auto add_shared = [&](CLI::App* cmd, CommonArgs& args) {
    add_common(cmd, args);
    cmd->add_option("--graph", graph, "graph spec (sbm,...|er,...|file,path=...)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");
  };

  CLI::App* cmd_pretrain = app.add_subcommand("pretrain", "train the reference link predictor");
  add_shared(cmd_pretrain, pretrain_args);

  CLI::App* cmd_unlearn =
      app.add_subcommand("unlearn", "estimate influence, select the forget set, unlearn");
  add_shared(cmd_unlearn, unlearn_args);
  cmd_unlearn->add_option("--checkpoint", checkpoint, "pretrained checkpoint (else in-process)");

  CLI::App* cmd_influence = app.add_subcommand("influence", "export node/edge influence CSVs");
  add_shared(cmd_influence, influence_args);
  cmd_influence->add_option("--checkpoint", checkpoint, "pretrained checkpoint");

  CLI::App* cmd_eval = app.add_subcommand("eval", "metrics for a checkpoint");
  add_shared(cmd_eval, eval_args);
  cmd_eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_shared(cmd_sweep, sweep_args);
  cmd_sweep->add_option("--param", sweep_param, "config key to sweep")->required();
  cmd_sweep->add_option("--values", sweep_values, "value list")->required()->delimiter(',');
  cmd_sweep->add_option("--jobs", jobs, "parallel runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pretrain->parsed()) {
      const auto cfg = resolve_config(pretrain_args, graph, out, seed);
      const auto outcome = inpo::run_pretrain(cfg, pretrain_args.force);
      std::cout << "checkpoint: " << outcome.paths.checkpoint << "\n"
                << "history:    " << outcome.paths.pretrain_history << "\n";
    } else if (cmd_unlearn->parsed()) {
      const auto cfg = resolve_config(unlearn_args, graph, out, seed);
      const auto outcome = inpo::run_unlearn(cfg, checkpoint, unlearn_args.force);
      std::cout << "unlearned:  " << outcome.paths.unlearned << "\n"
                << "history:    " << outcome.paths.history << "\n";
      if (!outcome.history.warning.empty())
        std::cout << "warning:    " << outcome.history.warning << "\n";
      if (outcome.report) {
        std::cout << "report:     " << outcome.paths.report << "\n";
        std::cout << "p_f=" << outcome.report->p_f << " p_r=" << outcome.report->p_r
                  << " p_r/p_f=" << outcome.report->ratio
                  << " mi_ratio=" << outcome.report->mi_ratio << "\n";
      } else {
        std::cout << "mi_ratio=1 (identity run)\n";
      }
    } else if (cmd_influence->parsed()) {
      const auto cfg = resolve_config(influence_args, graph, out, seed);
      const auto paths = inpo::run_influence(cfg, checkpoint, influence_args.force);
      std::cout << "nodes: " << paths.influence_nodes << "\n"
                << "edges: " << paths.influence_edges << "\n";
    } else if (cmd_eval->parsed()) {
      const auto cfg = resolve_config(eval_args, graph, out, seed);
      const auto paths = inpo::run_eval(cfg, checkpoint, eval_args.force);
      std::cout << "metrics: " << paths.metrics << "\n";
    } else if (cmd_sweep->parsed()) {
      const auto cfg = resolve_config(sweep_args, graph, out, seed);
      const auto csv = inpo::run_sweep(cfg, sweep_param, sweep_values, jobs, sweep_args.force);
      std::cout << "sweep: " << csv << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
