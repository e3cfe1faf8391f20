#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "inpo/gnn.hpp"
#include "inpo/graph.hpp"
#include "inpo/influence.hpp"
#include "inpo/losses.hpp"

namespace inpo {

// INPO is the full fine-tune (NPO + GD + TE with influence-scaled messages);
// INPO_S freezes the base weights and trains zero-initialized delete
// operators. The rest are the ablation / self-designed baselines.
enum class RunMode {
  INPO,
  INPO_S,
  NPO,
  NPO_GD,
  NPO_IMPNN,
  NPO_TE,
  NPO_GD_IMPNN,
  NPO_GD_TE,
  GA,
  GA_GD,
  GA_KL,
  DPO,
  DPO_GD,
  DPO_KL,
};

RunMode parse_run_mode(const std::string& name);  // throws ConfigError on unknown id
std::string run_mode_name(RunMode mode);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 128;
  std::size_t out_dim = 128;
  OptimizerKind optimizer = OptimizerKind::adam;
  RunMode mode = RunMode::INPO;
  // Influence message scaling for the IMPNN-bearing modes.
  MessageKind message_kind = MessageKind::influence_retain_damp;
  double q = 1.0;
  // INPO-S delete operators.
  bool low_rank_ops = false;
  std::size_t op_rank = 32;
  bool inpos_use_gd = true;
  bool kl_reverse = false;
};

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0;
  double loss_npo = 0;  // forget-side term (NPO/GA/DPO by mode)
  double loss_gd = 0;   // retain-side term (GD/KL by mode)
  double loss_te = 0;
  double p_f = 0;
  double p_r = 0;
  double auc_retain = 0;
  double ap_retain = 0;
  double auc_forget = 0;
  double ap_forget = 0;
  double mean_S = 0;
};

struct RunHistory {
  std::vector<EpochRecord> records;
  bool aborted = false;
  std::string warning;
};

void write_history_csv(const RunHistory& history, const std::string& path);

struct PretrainRecord {
  int epoch = 0;
  double loss = 0;
  double auc = 0;
  double ap = 0;
};

void write_pretrain_csv(const std::vector<PretrainRecord>& records, const std::string& path);

// Per-tensor Adam/SGD. Parameter order must be stable across steps.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Link-prediction pretraining on all graph edges (forget edges included)
// against per-epoch sampled negatives; freezes the reference snapshot at the
// end. Throws NumericError with the epoch index if the loss diverges.
GcnModel pretrain(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg,
                  std::vector<PretrainRecord>* history = nullptr);

// Unlearning fine-tune per cfg.mode. Records one entry per epoch index
// 0..epochs, where record e reflects the model after e updates. A non-finite
// loss aborts with partial history; an empty forget set is a no-op with a
// warning.
std::pair<GcnModel, RunHistory> unlearn(const GcnModel& model, const Graph& g,
                                        const EdgeSplit& split, const InfluenceMap& influence,
                                        const LossWeights& weights, const TrainConfig& cfg);

// Same harness with the loss combination and message mode of the ablation id.
std::pair<GcnModel, RunHistory> run_ablation(RunMode id, const GcnModel& model, const Graph& g,
                                             const EdgeSplit& split,
                                             const InfluenceMap& influence,
                                             const LossWeights& weights,
                                             const TrainConfig& cfg);

}  // namespace inpo
