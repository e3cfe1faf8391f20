#include "inpo/losses.hpp"

#include <cmath>

#include "inpo/error.hpp"

namespace inpo {

double clamp_prob(double p) {
  return p < kProbClampLo ? kProbClampLo : (p > kProbClampHi ? kProbClampHi : p);
}

namespace {

Tensor clamp_probs(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<real_t>(clamp_prob(out[i]));
  return out;
}

Tensor column(const std::vector<double>& v) {
  Tensor t(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<real_t>(v[i]);
  return t;
}

void require_beta(double beta) {
  if (beta <= 0) throw ConfigError("beta must be > 0");
}

}  // namespace

ag::Var npo_loss_t(ag::Tape& t, ag::Var pi_theta, const Tensor& pi_ref, double beta) {
  require_beta(beta);
  if (t.value(pi_theta).size() != pi_ref.size())
    throw ContractError("npo_loss: pi_theta/pi_ref size mismatch");
  if (t.value(pi_theta).empty()) throw ContractError("npo_loss: empty input");
  ag::Var p = t.clamp(pi_theta, kProbClampLo, kProbClampHi);
  ag::Var ratio = t.div(p, t.constant(clamp_probs(pi_ref)));
  ag::Var powed = t.pow_scalar(ratio, beta);
  ag::Var body = t.log(t.add_scalar(powed, 1.0));
  return t.mul_scalar(t.mean(body), 2.0 / beta);
}

ag::Var ga_loss_t(ag::Tape& t, ag::Var probs) {
  if (t.value(probs).empty()) throw ContractError("ga_loss: empty input");
  return t.mean(t.log(t.clamp(probs, kProbClampLo, kProbClampHi)));
}

ag::Var gd_loss_t(ag::Tape& t, ag::Var probs) {
  if (t.value(probs).empty()) throw ContractError("gd_loss: empty input");
  return t.neg(t.mean(t.log(t.clamp(probs, kProbClampLo, kProbClampHi))));
}

ag::Var kl_loss_t(ag::Tape& t, ag::Var pi_theta, const Tensor& pi_ref, bool reverse) {
  const Tensor ref = clamp_probs(pi_ref);
  if (t.value(pi_theta).size() != ref.size())
    throw ContractError("kl_loss: pi_theta/pi_ref size mismatch");
  if (ref.empty()) throw ContractError("kl_loss: empty input");
  ag::Var p = t.clamp(pi_theta, kProbClampLo, kProbClampHi);
  ag::Var q = t.add_scalar(t.neg(p), 1.0);
  Tensor log_ref = ref;
  Tensor log_ref1m = ref;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    log_ref[i] = std::log(ref[i]);
    log_ref1m[i] = std::log(1.0 - ref[i]);
  }
  if (!reverse) {
    // mean[ p log(p/ref) + (1-p) log((1-p)/(1-ref)) ]
    ag::Var t1 = t.mul(p, t.sub(t.log(p), t.constant(log_ref)));
    ag::Var t2 = t.mul(q, t.sub(t.log(q), t.constant(log_ref1m)));
    return t.mean(t.add(t1, t2));
  }
  // mean[ ref log(ref/p) + (1-ref) log((1-ref)/(1-p)) ]
  Tensor entropy(ref.rows(), ref.cols());
  Tensor ref1m(ref.rows(), ref.cols());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    entropy[i] = ref[i] * log_ref[i] + (1.0 - ref[i]) * log_ref1m[i];
    ref1m[i] = 1.0 - ref[i];
  }
  ag::Var cross = t.add(t.mul_const(t.log(p), ref), t.mul_const(t.log(q), ref1m));
  return t.mean(t.sub(t.constant(entropy), cross));
}

ag::Var dpo_loss_t(ag::Tape& t, ag::Var pi_pos, const Tensor& ref_pos, ag::Var pi_neg,
                   const Tensor& ref_neg, double beta) {
  require_beta(beta);
  if (t.value(pi_pos).size() != t.value(pi_neg).size())
    throw ContractError("dpo_loss: pos/neg must be paired");
  if (t.value(pi_pos).empty()) throw ContractError("dpo_loss: empty input");
  Tensor log_rp = clamp_probs(ref_pos);
  Tensor log_rn = clamp_probs(ref_neg);
  for (std::size_t i = 0; i < log_rp.size(); ++i) log_rp[i] = std::log(log_rp[i]);
  for (std::size_t i = 0; i < log_rn.size(); ++i) log_rn[i] = std::log(log_rn[i]);
  ag::Var lp = t.sub(t.log(t.clamp(pi_pos, kProbClampLo, kProbClampHi)), t.constant(log_rp));
  ag::Var ln = t.sub(t.log(t.clamp(pi_neg, kProbClampLo, kProbClampHi)), t.constant(log_rn));
  ag::Var z = t.mul_scalar(t.sub(lp, ln), beta);
  ag::Var s = t.clamp(t.sigmoid(z), kProbClampLo, kProbClampHi);
  return t.mul_scalar(t.mean(t.log(s)), -2.0 / beta);
}

ag::Var te_loss_t(ag::Tape& t, const Tensor& g_ref, ag::Var g) {
  const Tensor& gv = t.value(g);
  if (gv.rows() != g_ref.rows() || gv.cols() != g_ref.cols())
    throw ContractError("te_loss: shape mismatch");
  if (gv.empty()) throw ContractError("te_loss: empty input");
  // Softmax the reference embedding into a distribution (constant).
  Tensor p_ref(g_ref.rows(), g_ref.cols());
  for (std::size_t r = 0; r < g_ref.rows(); ++r) {
    real_t m = g_ref.at(r, 0);
    for (std::size_t c = 1; c < g_ref.cols(); ++c) m = std::max(m, g_ref.at(r, c));
    real_t z = 0;
    for (std::size_t c = 0; c < g_ref.cols(); ++c) {
      p_ref.at(r, c) = std::exp(g_ref.at(r, c) - m);
      z += p_ref.at(r, c);
    }
    for (std::size_t c = 0; c < g_ref.cols(); ++c) p_ref.at(r, c) /= z;
  }
  ag::Var ce = t.mul_const(t.log_softmax_rows(g), p_ref);
  return t.mul_scalar(t.sum(ce), -1.0 / static_cast<double>(gv.rows()));
}

ag::Var separation_loss_t(ag::Tape& t, ag::Var pi_retain, const Tensor& ref_retain,
                          ag::Var pi_forget, const Tensor& ref_forget, double beta) {
  require_beta(beta);
  auto reward = [&](ag::Var p, const Tensor& ref) {
    Tensor log_ref = clamp_probs(ref);
    for (std::size_t i = 0; i < log_ref.size(); ++i) log_ref[i] = std::log(log_ref[i]);
    ag::Var lr = t.sub(t.log(t.clamp(p, kProbClampLo, kProbClampHi)), t.constant(log_ref));
    return t.mean(t.mul_scalar(lr, beta));
  };
  return t.sub(reward(pi_forget, ref_forget), reward(pi_retain, ref_retain));
}

namespace {
// Evaluates a tape expression built from (pi_theta, pi_ref) column pairs.
template <typename Build>
double eval_pairs(const std::vector<ProbPair>& pairs, const Build& build) {
  if (pairs.empty()) throw ContractError("empty probability pair list");
  std::vector<double> theta, ref;
  theta.reserve(pairs.size());
  ref.reserve(pairs.size());
  for (const ProbPair& p : pairs) {
    theta.push_back(p.pi_theta);
    ref.push_back(p.pi_ref);
  }
  ag::Tape t;
  ag::Var v = build(t, t.leaf(column(theta)), column(ref));
  return t.value(v).scalar();
}
}  // namespace

double npo_loss(const std::vector<ProbPair>& pairs, double beta) {
  return eval_pairs(pairs, [beta](ag::Tape& t, ag::Var p, const Tensor& r) {
    return npo_loss_t(t, p, r, beta);
  });
}

double adaptive_coefficient(const ProbPair& pair, double beta) {
  require_beta(beta);
  const double pt = clamp_prob(pair.pi_theta);
  const double pr = clamp_prob(pair.pi_ref);
  // 2 pt^b / (pt^b + pr^b), computed through the log-ratio for stability.
  return 2.0 / (1.0 + std::exp(beta * (std::log(pr) - std::log(pt))));
}

double ga_loss(const std::vector<double>& probs) {
  if (probs.empty()) throw ContractError("ga_loss: empty input");
  ag::Tape t;
  return t.value(ga_loss_t(t, t.leaf(column(probs)))).scalar();
}

double gd_loss(const std::vector<double>& probs) {
  if (probs.empty()) throw ContractError("gd_loss: empty input");
  ag::Tape t;
  return t.value(gd_loss_t(t, t.leaf(column(probs)))).scalar();
}

double kl_loss(const std::vector<ProbPair>& pairs, bool reverse) {
  return eval_pairs(pairs, [reverse](ag::Tape& t, ag::Var p, const Tensor& r) {
    return kl_loss_t(t, p, r, reverse);
  });
}

double dpo_loss(const std::vector<ProbPair>& neg, const std::vector<ProbPair>& pos,
                double beta) {
  if (neg.size() != pos.size()) throw ContractError("dpo_loss: pos/neg must be paired");
  if (neg.empty()) throw ContractError("dpo_loss: empty input");
  std::vector<double> pn, pp;
  Tensor rn(neg.size(), 1), rp(pos.size(), 1);
  for (std::size_t i = 0; i < neg.size(); ++i) {
    pn.push_back(neg[i].pi_theta);
    pp.push_back(pos[i].pi_theta);
    rn[i] = static_cast<real_t>(neg[i].pi_ref);
    rp[i] = static_cast<real_t>(pos[i].pi_ref);
  }
  ag::Tape t;
  ag::Var v = dpo_loss_t(t, t.leaf(column(pp)), rp, t.leaf(column(pn)), rn, beta);
  return t.value(v).scalar();
}

double te_loss(const Tensor& g_ref, const Tensor& g) {
  ag::Tape t;
  return t.value(te_loss_t(t, g_ref, t.leaf(g))).scalar();
}

double separation_loss(const std::vector<ProbPair>& retain, const std::vector<ProbPair>& forget,
                       double beta) {
  if (retain.empty() || forget.empty()) throw ContractError("separation_loss: empty input");
  std::vector<double> pr, pf;
  Tensor rr(retain.size(), 1), rf(forget.size(), 1);
  for (std::size_t i = 0; i < retain.size(); ++i) {
    pr.push_back(retain[i].pi_theta);
    rr[i] = static_cast<real_t>(retain[i].pi_ref);
  }
  for (std::size_t i = 0; i < forget.size(); ++i) {
    pf.push_back(forget[i].pi_theta);
    rf[i] = static_cast<real_t>(forget[i].pi_ref);
  }
  ag::Tape t;
  ag::Var v = separation_loss_t(t, t.leaf(column(pr)), rr, t.leaf(column(pf)), rf, beta);
  return t.value(v).scalar();
}

Tensor local_structure_embedding(const Tensor& h_i, const Tensor& h_j) {
  if (!h_i.same_shape(h_j)) throw ContractError("local_structure_embedding: dim mismatch");
  return scale(add(h_i, h_j), 0.5);
}

double total_loss(double npo, double gd, double te, const LossWeights& w) {
  if (w.lambda1 < 0 || w.lambda2 < 0 || w.lambda3 < 0)
    throw ConfigError("loss weights must be >= 0");
  return w.lambda1 * npo + w.lambda2 * gd + w.lambda3 * te;
}

}  // namespace inpo
