#include "inpo/runner.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "inpo/error.hpp"

namespace fs = std::filesystem;

namespace inpo {

namespace {

void ensure_dims_match(const GcnModel& model, const Graph& g, const ExperimentConfig& cfg) {
  if (model.input_dim() != g.features().cols())
    throw CheckpointError("checkpoint input dim " + std::to_string(model.input_dim()) +
                          " does not match graph feature dim " +
                          std::to_string(g.features().cols()));
  if (model.output_dim() != static_cast<std::size_t>(cfg.out_dim))
    throw CheckpointError("checkpoint output dim does not match config out_dim");
}

GcnModel obtain_model(const ExperimentConfig& cfg, const Graph& g, const EdgeSplit& split,
                      const std::string& checkpoint_path) {
  if (checkpoint_path.empty()) return pretrain(g, split, train_config_for_pretrain(cfg));
  GcnModel model = load_checkpoint(checkpoint_path);
  ensure_dims_match(model, g, cfg);
  return model;
}

void write_metadata(const std::string& path, const ExperimentConfig& cfg,
                    const std::string& command, const std::vector<std::string>& extra) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metadata: " + path);
  out << "command=" << command << "\n"
      << "config_hash=" << config_hash(cfg, command) << "\n"
      << "decoder=dot_product_sigmoid\n"
      << "delete_operator=additive_linear\n"
      << "pi_ref=frozen_snapshot_standard_messages\n"
      << "eval_messages=standard\n"
      << "retain_auc=held_out_retain_subset_vs_reserved_non_edges\n"
      << "forget_auc=reserved_non_edges_positive_vs_forget_negative\n"
      << "mi_ratio=ratio_of_mean_probabilities\n"
      << "untrained_set=reserved_non_edges_excluded_from_training\n"
      << "prob_clamp=[1e-12,1-1e-12]\n"
      << "influence_f=all_node_embedding_sum_single_backward\n"
      << "edge_influence_scale=minmax_over_edges\n"
      << "lambda2_source=table_NI_weight\n"
      << "te_normalization=softmax_on_both_embeddings\n";
  for (const std::string& line : extra) out << line << "\n";
}

std::string metric_row(const std::string& run_id, const std::string& metric, double value) {
  std::ostringstream os;
  os.precision(17);
  os << run_id << ',' << metric << ',' << value << '\n';
  return os.str();
}

}  // namespace

RunPaths run_paths(const ExperimentConfig& cfg, const std::string& command) {
  RunPaths p;
  p.dir = (fs::path(cfg.out_dir) / (command + "-" + config_hash(cfg, command))).string();
  const fs::path d(p.dir);
  p.config = (d / "config.txt").string();
  p.metadata = (d / "metadata.txt").string();
  p.checkpoint = (d / "checkpoint.bin").string();
  p.unlearned = (d / "unlearned.bin").string();
  p.pretrain_history = (d / "pretrain_history.csv").string();
  p.history = (d / "history.csv").string();
  p.report = (d / "report.txt").string();
  p.metrics = (d / "metrics.csv").string();
  p.influence_nodes = (d / "influence_nodes.csv").string();
  p.influence_edges = (d / "influence_edges.csv").string();
  return p;
}

RunPaths prepare_run_dir(const ExperimentConfig& cfg, const std::string& command, bool force) {
  RunPaths p = run_paths(cfg, command);
  std::error_code ec;
  fs::create_directories(fs::path(cfg.out_dir), ec);
  if (fs::exists(p.dir)) {
    if (!force)
      throw IoError("run directory exists (use --force to overwrite): " + p.dir);
  } else {
    fs::create_directory(p.dir, ec);
    if (ec) throw IoError("cannot create run directory: " + p.dir);
  }
  save_config(cfg, p.config);
  return p;
}

PretrainOutcome run_pretrain(const ExperimentConfig& cfg, bool force) {
  RunPaths paths = prepare_run_dir(cfg, "pretrain", force);
  const Graph g = build_graph(cfg);
  // Pretraining trains on every edge; the split only reserves evaluation
  // sets, so the strategy is irrelevant here and high_influence (which
  // needs a model first) falls back to random.
  const EdgeSplit split =
      select_forget_set(g, cfg.delete_ratio, ForgetStrategy::random, nullptr, cfg.seed,
                        cfg.test_fraction);
  std::vector<PretrainRecord> history;
  GcnModel model = pretrain(g, split, train_config_for_pretrain(cfg), &history);
  save_checkpoint(model, paths.checkpoint);
  write_pretrain_csv(history, paths.pretrain_history);
  std::vector<std::string> extra;
  if (cfg.features.empty() && cfg.graph.rfind("file", 0) == 0)
    extra.push_back("warning=no feature file given, using identity features");
  write_metadata(paths.metadata, cfg, "pretrain", extra);
  return {std::move(paths), std::move(model)};
}

UnlearnOutcome run_unlearn(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                           bool force) {
  RunPaths paths = prepare_run_dir(cfg, "unlearn", force);
  const Graph g = build_graph(cfg);
  const EdgeSplit presplit =
      select_forget_set(g, cfg.delete_ratio, ForgetStrategy::random, nullptr, cfg.seed,
                        cfg.test_fraction);
  GcnModel model = obtain_model(cfg, g, presplit, checkpoint_path);
  if (!model.has_reference()) throw CheckpointError("checkpoint has no reference snapshot");
  const GcnModel ref = model.reference_model();

  // Influence is estimated once on the pretrained model and frozen.
  InfluenceMap influence = build_influence_map(g, nora_node_influence(g, ref));
  const EdgeSplit split = select_forget_set(g, cfg.delete_ratio, parse_strategy(cfg.strategy),
                                            &influence, cfg.seed, cfg.test_fraction);

  auto [unlearned, history] =
      unlearn(model, g, split, influence, loss_weights(cfg), train_config_for_unlearn(cfg));

  save_checkpoint(unlearned, paths.unlearned);
  write_history_csv(history, paths.history);

  std::vector<std::string> extra;
  extra.push_back("mode=" + cfg.mode);
  if (!history.warning.empty()) extra.push_back("warning=" + history.warning);

  UnlearnOutcome outcome{std::move(paths), std::move(unlearned), std::move(history),
                         std::nullopt};

  const std::string run_id = config_hash(cfg, "unlearn");
  std::ofstream metrics(outcome.paths.metrics);
  if (!metrics) throw IoError("cannot write metrics: " + outcome.paths.metrics);
  metrics << "run_id,metric,value\n";

  if (split.forget.empty()) {
    extra.push_back("warning=empty forget set: identity run");
    metrics << metric_row(run_id, "mi_ratio", 1.0);
  } else {
    const ForgetReport report = forget_report(ref, outcome.model, g, split, split.test_neg);
    write_report(report, outcome.paths.report);
    metrics << metric_row(run_id, "p_f", report.p_f)
            << metric_row(run_id, "p_r", report.p_r)
            << metric_row(run_id, "p_ut", report.p_ut)
            << metric_row(run_id, "ratio", report.ratio)
            << metric_row(run_id, "mi_ratio", report.mi_ratio)
            << metric_row(run_id, "indistinguishability", report.indistinguishability)
            << metric_row(run_id, "separability", report.separability);
    if (!outcome.history.records.empty()) {
      const EpochRecord& last = outcome.history.records.back();
      metrics << metric_row(run_id, "auc_retain", last.auc_retain)
              << metric_row(run_id, "ap_retain", last.ap_retain)
              << metric_row(run_id, "auc_forget", last.auc_forget)
              << metric_row(run_id, "ap_forget", last.ap_forget)
              << metric_row(run_id, "mean_S", last.mean_S);
    }
    outcome.report = report;
  }
  write_metadata(outcome.paths.metadata, cfg, "unlearn", extra);
  return outcome;
}

RunPaths run_influence(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                       bool force) {
  RunPaths paths = prepare_run_dir(cfg, "influence", force);
  const Graph g = build_graph(cfg);
  const EdgeSplit split =
      select_forget_set(g, cfg.delete_ratio, ForgetStrategy::random, nullptr, cfg.seed,
                        cfg.test_fraction);
  GcnModel model = obtain_model(cfg, g, split, checkpoint_path);
  const GcnModel ref = model.has_reference() ? model.reference_model() : model;
  InfluenceMap map = build_influence_map(g, nora_node_influence(g, ref));
  write_influence_csv(map, paths.influence_nodes, paths.influence_edges);
  write_metadata(paths.metadata, cfg, "influence", {});
  return paths;
}

RunPaths run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                  bool force) {
  RunPaths paths = prepare_run_dir(cfg, "eval", force);
  const Graph g = build_graph(cfg);
  const EdgeSplit presplit =
      select_forget_set(g, cfg.delete_ratio, ForgetStrategy::random, nullptr, cfg.seed,
                        cfg.test_fraction);
  GcnModel model = obtain_model(cfg, g, presplit, checkpoint_path);
  EdgeSplit split = presplit;
  if (parse_strategy(cfg.strategy) == ForgetStrategy::high_influence) {
    const GcnModel ref = model.has_reference() ? model.reference_model() : model;
    InfluenceMap influence = build_influence_map(g, nora_node_influence(g, ref));
    split = select_forget_set(g, cfg.delete_ratio, ForgetStrategy::high_influence, &influence,
                              cfg.seed, cfg.test_fraction);
  }

  const std::string run_id = config_hash(cfg, "eval");
  std::ofstream metrics(paths.metrics);
  if (!metrics) throw IoError("cannot write metrics: " + paths.metrics);
  metrics << "run_id,metric,value\n";
  const Tensor h = gcn_forward(g, symmetric_normalize(g), model);
  ScoredSet retain_set;
  for (const Edge& e : split.test_pos) {
    retain_set.scores.push_back(predict_edge(h, e));
    retain_set.labels.push_back(1);
  }
  for (const Edge& e : split.test_neg) {
    retain_set.scores.push_back(predict_edge(h, e));
    retain_set.labels.push_back(0);
  }
  metrics << metric_row(run_id, "auc", auc(retain_set))
          << metric_row(run_id, "ap", average_precision(retain_set));
  if (!split.forget.empty())
    metrics << metric_row(run_id, "p_f",
                          mean_edge_probability(model, g, split.forget));
  if (!split.retain.empty())
    metrics << metric_row(run_id, "p_r",
                          mean_edge_probability(model, g, split.retain));
  write_metadata(paths.metadata, cfg, "eval", {});
  return paths;
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const std::string& parameter,
                                   const std::string& value) {
  if (parameter == "out_dir" || parameter == "graph" || parameter == "features")
    throw ConfigError("parameter cannot be swept: " + parameter);
  ExperimentConfig out = cfg;
  set_config_key(out, parameter, value);
  return out;
}

std::string run_sweep(const ExperimentConfig& cfg, const std::string& parameter,
                      const std::vector<std::string>& values, int jobs, bool force) {
  if (values.empty()) throw ConfigError("sweep needs a non-empty value list");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");

  ExperimentConfig sweep_cfg = cfg;
  const std::string sweep_id = config_hash(cfg, "sweep-" + parameter);
  const fs::path sweep_dir = fs::path(cfg.out_dir) / ("sweep-" + sweep_id);
  if (fs::exists(sweep_dir) && !force)
    throw IoError("sweep directory exists (use --force to overwrite): " + sweep_dir.string());
  fs::create_directories(sweep_dir);
  save_config(cfg, (sweep_dir / "config.txt").string());

  std::vector<ExperimentConfig> configs;
  for (const std::string& v : values) {
    ExperimentConfig child = apply_sweep_value(cfg, parameter, v);
    child.out_dir = sweep_dir.string();
    configs.push_back(std::move(child));
  }

  std::vector<UnlearnOutcome> results(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        results[i] = run_unlearn(configs[i], "", force);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(configs.size()));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  const std::string csv_path = (sweep_dir / "sweep.csv").string();
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write sweep csv: " + csv_path);
  out.precision(17);
  out << parameter
      << ",run_id,p_f,p_r,ratio,mi_ratio,indistinguishability,separability,"
         "auc_retain,ap_retain,auc_forget,ap_forget,mean_S\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const UnlearnOutcome& r = results[i];
    out << values[i] << ',' << config_hash(configs[i], "unlearn") << ',';
    if (r.report) {
      const ForgetReport& rep = *r.report;
      out << rep.p_f << ',' << rep.p_r << ',' << rep.ratio << ',' << rep.mi_ratio << ','
          << rep.indistinguishability << ',' << rep.separability << ',';
    } else {
      out << ",,,,,,";
    }
    if (!r.history.records.empty()) {
      const EpochRecord& last = r.history.records.back();
      out << last.auc_retain << ',' << last.ap_retain << ',' << last.auc_forget << ','
          << last.ap_forget << ',' << last.mean_S << '\n';
    } else {
      out << ",,,,\n";
    }
  }
  return csv_path;
}

}  // namespace inpo
