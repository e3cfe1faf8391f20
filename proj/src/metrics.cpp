#include "inpo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "inpo/error.hpp"
#include "inpo/losses.hpp"

namespace inpo {

namespace {
void validate(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size())
    throw ContractError("scored set: scores/labels length mismatch");
  for (int l : s.labels)
    if (l != 0 && l != 1) throw ContractError("scored set: labels must be 0/1");
}
}  // namespace

double auc(const ScoredSet& s) {
  validate(s);
  const std::size_t n = s.scores.size();
  std::size_t n_pos = 0;
  for (int l : s.labels) n_pos += l;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Mann-Whitney U with average ranks over tied groups.
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (s.labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(const ScoredSet& s) {
  validate(s);
  const std::size_t n = s.scores.size();
  std::size_t n_pos = 0;
  for (int l : s.labels) n_pos += l;
  if (n_pos == 0) throw MetricError("average_precision needs a positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });

  double ap = 0;
  double prev_recall = 0;
  std::size_t tp = 0, seen = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) tp += s.labels[order[k]];
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}
}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ContractError("spearman needs two equal-length vectors, n >= 2");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) throw MetricError("spearman undefined for constant ranks");
  return cov / std::sqrt(va * vb);
}

double mean_edge_probability(const GcnModel& model, const Graph& g,
                             const std::vector<Edge>& edges, const MessageMode& mode,
                             const EdgeSplit* split) {
  if (edges.empty()) throw ContractError("mean_edge_probability: empty edge set");
  const Tensor h = gcn_forward(g, symmetric_normalize(g), model, mode, split);
  double sum = 0;
  for (const Edge& e : edges) sum += clamp_prob(predict_edge(h, e));
  return sum / static_cast<double>(edges.size());
}

double mi_ratio(const GcnModel& ref_model, const GcnModel& unlearned, const Graph& g,
                const std::vector<Edge>& forget) {
  const double before = mean_edge_probability(ref_model, g, forget);
  const double after = mean_edge_probability(unlearned, g, forget);
  return before / std::max(after, kProbClampLo);
}

ForgetReport forget_report(const GcnModel& ref_model, const GcnModel& unlearned,
                           const Graph& g, const EdgeSplit& split,
                           const std::vector<Edge>& untrained_neg) {
  if (split.forget.empty() || split.retain.empty() || untrained_neg.empty())
    throw ContractError("forget_report: empty edge set");
  ForgetReport r;
  r.p_f = mean_edge_probability(unlearned, g, split.forget);
  r.p_r = mean_edge_probability(unlearned, g, split.retain);
  r.p_ut = mean_edge_probability(unlearned, g, untrained_neg);
  r.ratio = r.p_r / std::max(r.p_f, kProbClampLo);
  r.mi_ratio = inpo::mi_ratio(ref_model, unlearned, g, split.forget);
  r.indistinguishability = std::abs(r.p_f - r.p_ut);
  r.separability = std::abs(r.p_r - r.p_f);
  return r;
}

void write_report(const ForgetReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  out.precision(17);
  out << "p_f=" << report.p_f << "\n"
      << "p_r=" << report.p_r << "\n"
      << "p_ut=" << report.p_ut << "\n"
      << "ratio=" << report.ratio << "\n"
      << "mi_ratio=" << report.mi_ratio << "\n"
      << "indistinguishability=" << report.indistinguishability << "\n"
      << "separability=" << report.separability << "\n";
}

}  // namespace inpo
