#pragma once

#include <cstdint>
#include <string>

#include "inpo/graph.hpp"
#include "inpo/trainer.hpp"

namespace inpo {

// Full experiment description, serializable to a line-oriented key=value
// file. parse(serialize(c)) == c for every valid config; unknown keys are
// rejected.
struct ExperimentConfig {
  // "sbm,n=300,blocks=2,p_in=0.3,p_out=0.02,seed=7", "er,n=50,p=0.1,seed=0"
  // or "file,path=edges.txt".
  std::string graph = "sbm,n=60,blocks=2,p_in=0.3,p_out=0.02,seed=0";
  std::string features;  // optional feature file for file graphs
  int max_feature_dim = 128;
  int hidden_dim = 128;
  int out_dim = 128;

  double delete_ratio = 0.005;
  std::string strategy = "random";  // random | high_influence
  double test_fraction = 0.1;

  std::string mode = "INPO";  // INPO | INPO-S | ablation ids
  std::string message_mode = "retain_damp";  // standard | forget_boost | retain_damp
  double q = 1.0;
  double beta = 2.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.2;

  int pretrain_epochs = 100;
  int epochs = 100;
  double lr = 1e-3;
  std::string optimizer = "adam";  // adam | sgd
  std::uint64_t seed = 0;

  std::string delete_op = "full";  // full | low_rank
  int delete_op_rank = 32;
  bool inpos_use_gd = true;
  bool kl_reverse = false;

  std::string out_dir = "runs";

  bool operator==(const ExperimentConfig&) const = default;
};

std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config_text(const std::string& text);
// Sets one field from its textual form; throws ConfigError on unknown keys
// or malformed values.
void set_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// FNV-1a of the command name plus the canonical serialization; names the
// run directory.
std::string config_hash(const ExperimentConfig& cfg, const std::string& command);

Graph build_graph(const ExperimentConfig& cfg);

TrainConfig train_config_for_pretrain(const ExperimentConfig& cfg);
TrainConfig train_config_for_unlearn(const ExperimentConfig& cfg);
LossWeights loss_weights(const ExperimentConfig& cfg);
ForgetStrategy parse_strategy(const std::string& s);

}  // namespace inpo
