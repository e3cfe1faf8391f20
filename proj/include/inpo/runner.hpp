#pragma once

#include <optional>
#include <string>
#include <vector>

#include "inpo/config.hpp"
#include "inpo/metrics.hpp"

namespace inpo {

// All artifacts of one run live under <out_dir>/<command>-<config-hash>/.
struct RunPaths {
  std::string dir;
  std::string config;
  std::string metadata;
  std::string checkpoint;         // pretrain output / unlearn input copy
  std::string unlearned;          // unlearn output
  std::string pretrain_history;
  std::string history;
  std::string report;
  std::string metrics;
  std::string influence_nodes;
  std::string influence_edges;
};

RunPaths run_paths(const ExperimentConfig& cfg, const std::string& command);

// Creates the run directory; throws IoError if it already exists (config
// hashes name directories so nothing is silently overwritten) unless force.
RunPaths prepare_run_dir(const ExperimentConfig& cfg, const std::string& command, bool force);

struct PretrainOutcome {
  RunPaths paths;
  GcnModel model;
};

struct UnlearnOutcome {
  RunPaths paths;
  GcnModel model;
  RunHistory history;
  std::optional<ForgetReport> report;  // absent for an empty forget set
};

PretrainOutcome run_pretrain(const ExperimentConfig& cfg, bool force = false);

// checkpoint_path empty: pretrains in-process (no files written for the
// pretraining stage).
UnlearnOutcome run_unlearn(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                           bool force = false);

RunPaths run_influence(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                       bool force = false);

RunPaths run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                  bool force = false);

// Cross-product sweep over one parameter; one CSV row per run with the
// ForgetReport fields and final-epoch metrics. jobs > 1 runs configs in
// worker threads; row order follows the value list regardless of timing.
std::string run_sweep(const ExperimentConfig& cfg, const std::string& parameter,
                      const std::vector<std::string>& values, int jobs, bool force = false);

// Applies one swept value to a config copy; throws ConfigError for unknown
// or unsweepable parameters.
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const std::string& parameter,
                                   const std::string& value);

}  // namespace inpo
