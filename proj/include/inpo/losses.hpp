#pragma once

#include <vector>

#include "inpo/autograd.hpp"
#include "inpo/tensor.hpp"

namespace inpo {

// Holistic loss weights: total = lambda1 * forget + lambda2 * retain +
// lambda3 * topological entropy.
struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.2;
  double beta = 2.0;
};

struct ProbPair {
  double pi_theta = 0;
  double pi_ref = 0;
};

inline constexpr double kProbClampLo = 1e-12;
inline constexpr double kProbClampHi = 1.0 - 1e-12;
double clamp_prob(double p);

// Tape-level losses (training path). Probability inputs are [m x 1];
// reference probabilities enter as constants. All probabilities are clamped
// to [1e-12, 1-1e-12] before any log.

// (2/beta) * mean log(1 + (pi_theta/pi_ref)^beta)
ag::Var npo_loss_t(ag::Tape& t, ag::Var pi_theta, const Tensor& pi_ref, double beta);

// mean log pi (negated cross-entropy; minimizing pushes pi down)
ag::Var ga_loss_t(ag::Tape& t, ag::Var probs);

// mean -log p. Callers pass pi for positives and 1-pi for sampled negatives.
ag::Var gd_loss_t(ag::Tape& t, ag::Var probs);

// Bernoulli KL(pi_theta || pi_ref) per edge, averaged. reverse flips the
// orientation to KL(pi_ref || pi_theta).
ag::Var kl_loss_t(ag::Tape& t, ag::Var pi_theta, const Tensor& pi_ref, bool reverse = false);

// -(2/beta) * mean log sigmoid(beta * (log pos_ratio - log neg_ratio)),
// pos drawn from the retain set, neg from the forget set, paired by index.
ag::Var dpo_loss_t(ag::Tape& t, ag::Var pi_pos, const Tensor& ref_pos, ag::Var pi_neg,
                   const Tensor& ref_neg, double beta);

// Cross-entropy between softmax(g_ref) and softmax(g), summed per row and
// averaged over rows (one row per forget edge).
ag::Var te_loss_t(ag::Tape& t, const Tensor& g_ref, ag::Var g);

// Simplified separation objective: -mean_retain r + mean_forget r with
// r = beta * log(pi_theta/pi_ref).
ag::Var separation_loss_t(ag::Tape& t, ag::Var pi_retain, const Tensor& ref_retain,
                          ag::Var pi_forget, const Tensor& ref_forget, double beta);

// Scalar wrappers over the tape versions (spec-facing API).
double npo_loss(const std::vector<ProbPair>& pairs, double beta);
double adaptive_coefficient(const ProbPair& pair, double beta);  // in (0,2)
double ga_loss(const std::vector<double>& probs);
double gd_loss(const std::vector<double>& probs);
double kl_loss(const std::vector<ProbPair>& pairs, bool reverse = false);
double dpo_loss(const std::vector<ProbPair>& neg, const std::vector<ProbPair>& pos,
                double beta);
double te_loss(const Tensor& g_ref, const Tensor& g);
double separation_loss(const std::vector<ProbPair>& retain, const std::vector<ProbPair>& forget,
                       double beta);

// G_ij = (h_i + h_j) / 2, rows of equal dimension.
Tensor local_structure_embedding(const Tensor& h_i, const Tensor& h_j);

double total_loss(double npo, double gd, double te, const LossWeights& w);

}  // namespace inpo
