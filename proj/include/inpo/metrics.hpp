#pragma once

#include <string>
#include <vector>

#include "inpo/gnn.hpp"
#include "inpo/graph.hpp"

namespace inpo {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1
};

// Probability that a random positive outranks a random negative, ties 0.5.
double auc(const ScoredSet& s);

// sum_n (R_n - R_{n-1}) * P_n over descending score thresholds.
double average_precision(const ScoredSet& s);

// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Arithmetic mean of clamped predict_edge over the set.
double mean_edge_probability(const GcnModel& model, const Graph& g,
                             const std::vector<Edge>& edges,
                             const MessageMode& mode = MessageMode::standard(),
                             const EdgeSplit* split = nullptr);

// Mean forget probability of the reference model divided by the unlearned
// model's (ratio of means).
double mi_ratio(const GcnModel& ref_model, const GcnModel& unlearned, const Graph& g,
                const std::vector<Edge>& forget);

struct ForgetReport {
  double p_f = 0;
  double p_r = 0;
  double p_ut = 0;
  double ratio = 0;      // p_r / p_f
  double mi_ratio = 0;
  double indistinguishability = 0;  // |p_f - p_ut|
  double separability = 0;          // |p_r - p_f|
};

// untrained_neg must be true non-edges kept out of all training-time
// sampling. All probabilities come from standard-message forwards.
ForgetReport forget_report(const GcnModel& ref_model, const GcnModel& unlearned,
                           const Graph& g, const EdgeSplit& split,
                           const std::vector<Edge>& untrained_neg);

void write_report(const ForgetReport& report, const std::string& path);

}  // namespace inpo
