#include "inpo/trainer.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include "inpo/error.hpp"
#include "inpo/metrics.hpp"

namespace inpo {

namespace {

const std::unordered_map<std::string, RunMode> kModeNames = {
    {"INPO", RunMode::INPO},
    {"INPO-S", RunMode::INPO_S},
    {"NPO", RunMode::NPO},
    {"NPO+GD", RunMode::NPO_GD},
    {"NPO+IMPNN", RunMode::NPO_IMPNN},
    {"NPO+TE", RunMode::NPO_TE},
    {"NPO+GD+IMPNN", RunMode::NPO_GD_IMPNN},
    {"NPO+GD+TE", RunMode::NPO_GD_TE},
    {"GA", RunMode::GA},
    {"GA+GD", RunMode::GA_GD},
    {"GA+KL", RunMode::GA_KL},
    {"DPO", RunMode::DPO},
    {"DPO+GD", RunMode::DPO_GD},
    {"DPO+KL", RunMode::DPO_KL},
};

enum class ForgetTerm { npo, ga, dpo };
enum class RetainTerm { none, gd, kl };

struct ModePlan {
  ForgetTerm forget = ForgetTerm::npo;
  RetainTerm retain = RetainTerm::gd;
  bool te = false;
  bool impnn = false;
  bool delete_ops = false;
};

ModePlan plan_for(RunMode mode, bool inpos_use_gd) {
  switch (mode) {
    case RunMode::INPO:
      return {ForgetTerm::npo, RetainTerm::gd, true, true, false};
    case RunMode::INPO_S:
      return {ForgetTerm::npo, inpos_use_gd ? RetainTerm::gd : RetainTerm::none, true, true,
              true};
    case RunMode::NPO:
      return {ForgetTerm::npo, RetainTerm::none, false, false, false};
    case RunMode::NPO_GD:
      return {ForgetTerm::npo, RetainTerm::gd, false, false, false};
    case RunMode::NPO_IMPNN:
      return {ForgetTerm::npo, RetainTerm::none, false, true, false};
    case RunMode::NPO_TE:
      return {ForgetTerm::npo, RetainTerm::none, true, false, false};
    case RunMode::NPO_GD_IMPNN:
      return {ForgetTerm::npo, RetainTerm::gd, false, true, false};
    case RunMode::NPO_GD_TE:
      return {ForgetTerm::npo, RetainTerm::gd, true, false, false};
    case RunMode::GA:
      return {ForgetTerm::ga, RetainTerm::none, false, false, false};
    case RunMode::GA_GD:
      return {ForgetTerm::ga, RetainTerm::gd, false, false, false};
    case RunMode::GA_KL:
      return {ForgetTerm::ga, RetainTerm::kl, false, false, false};
    case RunMode::DPO:
      return {ForgetTerm::dpo, RetainTerm::none, false, false, false};
    case RunMode::DPO_GD:
      return {ForgetTerm::dpo, RetainTerm::gd, false, false, false};
    case RunMode::DPO_KL:
      return {ForgetTerm::dpo, RetainTerm::kl, false, false, false};
  }
  throw ConfigError("unhandled run mode");
}

std::vector<Tensor*> trainable_params(GcnModel& model, TrainScope scope) {
  std::vector<Tensor*> out;
  if (scope == TrainScope::base_weights || scope == TrainScope::all) {
    for (GcnLayer& l : model.layers) {
      out.push_back(&l.w_self);
      out.push_back(&l.w_neigh);
    }
  }
  if (scope == TrainScope::delete_ops || scope == TrainScope::all) {
    for (DeleteOperator& op : model.delete_ops) {
      if (op.low_rank) {
        out.push_back(&op.a);
        out.push_back(&op.b);
      } else {
        out.push_back(&op.full);
      }
    }
  }
  return out;
}

std::vector<ag::Var> trainable_vars(const GcnVars& vars, TrainScope scope) {
  std::vector<ag::Var> out;
  if (scope == TrainScope::base_weights || scope == TrainScope::all) {
    for (const auto& l : vars.layers) {
      out.push_back(l.w_self);
      out.push_back(l.w_neigh);
    }
  }
  if (scope == TrainScope::delete_ops || scope == TrainScope::all) {
    for (const auto& op : vars.ops) {
      if (op.low_rank) {
        out.push_back(op.a);
        out.push_back(op.b);
      } else {
        out.push_back(op.full);
      }
    }
  }
  return out;
}

Tensor clamp_column(const std::vector<double>& v) {
  Tensor t(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<real_t>(clamp_prob(v[i]));
  return t;
}

// (h_u + h_v)/2 rows for a list of edges.
ag::Var local_structure_rows(ag::Tape& tape, ag::Var h, const std::vector<Edge>& edges) {
  std::vector<int> us, vs;
  for (const Edge& e : edges) {
    us.push_back(e.u);
    vs.push_back(e.v);
  }
  return tape.mul_scalar(tape.add(tape.gather_rows(h, us), tape.gather_rows(h, vs)), 0.5);
}

Tensor local_structure_rows_plain(const Tensor& h, const std::vector<Edge>& edges) {
  Tensor out(edges.size(), h.cols());
  for (std::size_t k = 0; k < edges.size(); ++k)
    for (std::size_t c = 0; c < h.cols(); ++c)
      out.at(k, c) = real_t(0.5) * (h.at(edges[k].u, c) + h.at(edges[k].v, c));
  return out;
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  auto it = kModeNames.find(name);
  if (it == kModeNames.end()) throw ConfigError("unknown run mode: " + name);
  return it->second;
}

std::string run_mode_name(RunMode mode) {
  for (const auto& [name, m] : kModeNames)
    if (m == mode) return name;
  throw ConfigError("unhandled run mode");
}

void Optimizer::step(const std::vector<Tensor*>& params,
                     const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw ContractError("optimizer: params/grads mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw ContractError("optimizer: parameter set changed");
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i]->size(); ++j)
        (*params[i])[j] -= static_cast<real_t>(lr_) * (*grads[i])[j];
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m_[i][j] = static_cast<real_t>(b1 * m_[i][j] + (1 - b1) * g[j]);
      v_[i][j] = static_cast<real_t>(b2 * v_[i][j] + (1 - b2) * g[j] * g[j]);
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p[j] -= static_cast<real_t>(lr_ * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

void write_history_csv(const RunHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history: " + path);
  out.precision(17);
  out << "epoch,loss_total,loss_npo,loss_gd,loss_te,p_f,p_r,auc_retain,ap_retain,"
         "auc_forget,ap_forget,mean_S\n";
  for (const EpochRecord& r : history.records)
    out << r.epoch << ',' << r.loss_total << ',' << r.loss_npo << ',' << r.loss_gd << ','
        << r.loss_te << ',' << r.p_f << ',' << r.p_r << ',' << r.auc_retain << ','
        << r.ap_retain << ',' << r.auc_forget << ',' << r.ap_forget << ',' << r.mean_S
        << '\n';
}

void write_pretrain_csv(const std::vector<PretrainRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pretrain history: " + path);
  out.precision(17);
  out << "epoch,loss,auc,ap\n";
  for (const PretrainRecord& r : records)
    out << r.epoch << ',' << r.loss << ',' << r.auc << ',' << r.ap << '\n';
}

GcnModel pretrain(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg,
                  std::vector<PretrainRecord>* history) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  GcnModel model = init_gcn(g.features().cols(), cfg.hidden_dim, cfg.out_dim, cfg.seed);
  const NormalizedAdjacency adj = symmetric_normalize(g);
  const MessageGraph mg = build_message_graph(g, adj, MessageMode::standard(), nullptr);

  std::vector<Edge> train_edges = g.edges();
  EdgeSet reserved(split.test_neg.begin(), split.test_neg.end());
  std::mt19937_64 neg_rng(derive_seed(cfg.seed, "pretrain-neg"));
  Optimizer opt(cfg.optimizer, cfg.lr);

  auto eval_record = [&](int epoch, double loss) {
    if (!history) return;
    PretrainRecord rec;
    rec.epoch = epoch;
    rec.loss = loss;
    if (!split.test_pos.empty() && !split.test_neg.empty()) {
      const Tensor h = gcn_forward(g, adj, model);
      ScoredSet s;
      for (const Edge& e : split.test_pos) {
        s.scores.push_back(predict_edge(h, e));
        s.labels.push_back(1);
      }
      for (const Edge& e : split.test_neg) {
        s.scores.push_back(predict_edge(h, e));
        s.labels.push_back(0);
      }
      rec.auc = auc(s);
      rec.ap = average_precision(s);
    }
    history->push_back(rec);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<Edge> negs =
        sample_non_edges(g, train_edges.size(), neg_rng(), reserved);
    double loss_value = 0;
    try {
      ag::Tape tape;
      GcnVars vars = register_model(tape, model, TrainScope::base_weights);
      ag::Var h = gcn_forward_tape(tape, g, mg, vars);
      ag::Var p_pos = predict_edges_tape(tape, h, train_edges);
      ag::Var p_neg = predict_edges_tape(tape, h, negs);
      ag::Var probs = tape.concat_rows(p_pos, tape.add_scalar(tape.neg(p_neg), 1.0));
      ag::Var loss = gd_loss_t(tape, probs);
      loss_value = tape.value(loss).scalar();
      tape.backward(loss);
      std::vector<Tensor*> params = trainable_params(model, TrainScope::base_weights);
      std::vector<ag::Var> pvars = trainable_vars(vars, TrainScope::base_weights);
      std::vector<const Tensor*> grads;
      for (ag::Var v : pvars) grads.push_back(&tape.grad(v));
      opt.step(params, grads);
    } catch (const NumericError& e) {
      throw NumericError("pretrain diverged at epoch " + std::to_string(epoch) + ": " +
                         e.what());
    }
    eval_record(epoch, loss_value);
  }
  model.freeze_reference();
  return model;
}

std::pair<GcnModel, RunHistory> unlearn(const GcnModel& model, const Graph& g,
                                        const EdgeSplit& split, const InfluenceMap& influence,
                                        const LossWeights& weights, const TrainConfig& cfg) {
  if (!model.has_reference()) throw ContractError("unlearn requires a pretrained model");
  RunHistory history;
  if (split.forget.empty()) {
    history.warning = "empty forget set: unlearning is a no-op";
    return {model, history};
  }
  if (weights.lambda1 == 0 && weights.lambda2 == 0 && weights.lambda3 == 0)
    history.warning = "all loss weights are zero: degenerate configuration";

  ModePlan plan = plan_for(cfg.mode, cfg.inpos_use_gd);
  if (split.retain.empty()) plan.retain = RetainTerm::none;
  if (plan.forget == ForgetTerm::dpo && split.retain.empty())
    throw ConfigError("DPO needs retain edges for positive samples");
  const NormalizedAdjacency adj = symmetric_normalize(g);

  // Reference beliefs come from the frozen snapshot with standard messages.
  const GcnModel ref_model = model.reference_model();
  const Tensor h_ref = gcn_forward(g, adj, ref_model);
  const Tensor ref_forget = clamp_column(predict_edges(h_ref, split.forget));
  const Tensor ref_retain = clamp_column(predict_edges(h_ref, split.retain));
  const Tensor g_ref = local_structure_rows_plain(h_ref, split.forget);

  GcnModel work = model;
  const TrainScope scope = plan.delete_ops ? TrainScope::delete_ops : TrainScope::base_weights;
  if (plan.delete_ops)
    attach_delete_ops(work, g, split.forget, cfg.low_rank_ops, cfg.op_rank,
                      derive_seed(cfg.seed, "delete-ops"));

  MessageMode train_mode = MessageMode::standard();
  if (plan.impnn) {
    if (cfg.message_kind == MessageKind::standard)
      throw ConfigError("IMPNN mode requires an influence message kind");
    train_mode = MessageMode{cfg.message_kind, cfg.q, &influence};
  }
  const MessageGraph train_mg = build_message_graph(g, adj, train_mode, &split);

  // Fixed negative sample for the retain-side GD term.
  EdgeSet reserved(split.test_neg.begin(), split.test_neg.end());
  std::vector<Edge> gd_negs;
  if (plan.retain == RetainTerm::gd)
    gd_negs = sample_non_edges(g, split.retain.size(), derive_seed(cfg.seed, "unlearn-neg"),
                               reserved);
  std::mt19937_64 dpo_rng(derive_seed(cfg.seed, "dpo-pos"));

  const double eff_l1 = weights.lambda1;
  const double eff_l2 = plan.retain == RetainTerm::none ? 0.0 : weights.lambda2;
  const double eff_l3 = plan.te ? weights.lambda3 : 0.0;

  Optimizer opt(cfg.optimizer, cfg.lr);

  auto record_state = [&](int epoch, double total, double f_loss, double r_loss,
                          double te_val, const Tensor& train_pf) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_total = total;
    rec.loss_npo = f_loss;
    rec.loss_gd = r_loss;
    rec.loss_te = te_val;
    double s_sum = 0;
    for (std::size_t i = 0; i < train_pf.size(); ++i)
      s_sum += adaptive_coefficient({train_pf[i], ref_forget[i]}, weights.beta);
    rec.mean_S = s_sum / static_cast<double>(train_pf.size());

    const Tensor h = gcn_forward(g, adj, work);  // standard messages
    double pf = 0, pr = 0;
    for (const Edge& e : split.forget) pf += clamp_prob(predict_edge(h, e));
    for (const Edge& e : split.retain) pr += clamp_prob(predict_edge(h, e));
    rec.p_f = pf / static_cast<double>(split.forget.size());
    if (!split.retain.empty()) rec.p_r = pr / static_cast<double>(split.retain.size());

    if (!split.test_pos.empty() && !split.test_neg.empty()) {
      ScoredSet retain_set;
      for (const Edge& e : split.test_pos) {
        retain_set.scores.push_back(predict_edge(h, e));
        retain_set.labels.push_back(1);
      }
      for (const Edge& e : split.test_neg) {
        retain_set.scores.push_back(predict_edge(h, e));
        retain_set.labels.push_back(0);
      }
      rec.auc_retain = auc(retain_set);
      rec.ap_retain = average_precision(retain_set);
    }

    if (!split.test_neg.empty()) {
      // Forget-quality AUC: true non-edges as the positive class, forget
      // edges as the negative class, so pushing forget probabilities below
      // non-edge level scores high.
      ScoredSet forget_set;
      for (const Edge& e : split.test_neg) {
        forget_set.scores.push_back(predict_edge(h, e));
        forget_set.labels.push_back(1);
      }
      for (const Edge& e : split.forget) {
        forget_set.scores.push_back(predict_edge(h, e));
        forget_set.labels.push_back(0);
      }
      rec.auc_forget = auc(forget_set);
      rec.ap_forget = average_precision(forget_set);
    }
    history.records.push_back(rec);
  };

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    try {
      ag::Tape tape;
      GcnVars vars = register_model(tape, work, scope);
      ag::Var h = gcn_forward_tape(tape, g, train_mg, vars);
      ag::Var pi_f = predict_edges_tape(tape, h, split.forget);

      ag::Var f_term;
      switch (plan.forget) {
        case ForgetTerm::npo:
          f_term = npo_loss_t(tape, pi_f, ref_forget, weights.beta);
          break;
        case ForgetTerm::ga:
          f_term = ga_loss_t(tape, pi_f);
          break;
        case ForgetTerm::dpo: {
          std::uniform_int_distribution<std::size_t> pick(0, split.retain.size() - 1);
          std::vector<Edge> pos;
          Tensor ref_pos(split.forget.size(), 1);
          for (std::size_t i = 0; i < split.forget.size(); ++i) {
            const std::size_t j = pick(dpo_rng);
            pos.push_back(split.retain[j]);
            ref_pos[i] = ref_retain[j];
          }
          ag::Var pi_pos = predict_edges_tape(tape, h, pos);
          f_term = dpo_loss_t(tape, pi_pos, ref_pos, pi_f, ref_forget, weights.beta);
          break;
        }
      }

      ag::Var r_term = tape.scalar(0.0);
      if (plan.retain == RetainTerm::gd) {
        ag::Var pi_r = predict_edges_tape(tape, h, split.retain);
        ag::Var pi_n = predict_edges_tape(tape, h, gd_negs);
        ag::Var probs = tape.concat_rows(pi_r, tape.add_scalar(tape.neg(pi_n), 1.0));
        r_term = gd_loss_t(tape, probs);
      } else if (plan.retain == RetainTerm::kl) {
        ag::Var pi_r = predict_edges_tape(tape, h, split.retain);
        r_term = kl_loss_t(tape, pi_r, ref_retain, cfg.kl_reverse);
      }

      ag::Var te_term = tape.scalar(0.0);
      if (plan.te)
        te_term = te_loss_t(tape, g_ref, local_structure_rows(tape, h, split.forget));

      ag::Var total = tape.add(
          tape.add(tape.mul_scalar(f_term, eff_l1), tape.mul_scalar(r_term, eff_l2)),
          tape.mul_scalar(te_term, eff_l3));

      record_state(epoch, tape.value(total).scalar(), tape.value(f_term).scalar(),
                   tape.value(r_term).scalar(), tape.value(te_term).scalar(),
                   tape.value(pi_f));

      if (epoch == cfg.epochs) break;
      tape.backward(total);
      std::vector<Tensor*> params = trainable_params(work, scope);
      std::vector<ag::Var> pvars = trainable_vars(vars, scope);
      std::vector<const Tensor*> grads;
      for (ag::Var v : pvars) grads.push_back(&tape.grad(v));
      opt.step(params, grads);
    } catch (const NumericError& e) {
      history.aborted = true;
      history.warning = "aborted at epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
  }
  return {std::move(work), std::move(history)};
}

std::pair<GcnModel, RunHistory> run_ablation(RunMode id, const GcnModel& model, const Graph& g,
                                             const EdgeSplit& split,
                                             const InfluenceMap& influence,
                                             const LossWeights& weights,
                                             const TrainConfig& cfg) {
  TrainConfig ablation_cfg = cfg;
  ablation_cfg.mode = id;
  return unlearn(model, g, split, influence, weights, ablation_cfg);
}

}  // namespace inpo
