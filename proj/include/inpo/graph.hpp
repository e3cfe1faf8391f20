#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "inpo/tensor.hpp"

namespace inpo {

// Undirected edge, canonical order u < v.
struct Edge {
  int u = 0;
  int v = 0;
  bool operator==(const Edge&) const = default;
};

Edge make_edge(int a, int b);  // canonicalizes; throws ValidationError on self-loop

struct EdgeHash {
  std::size_t operator()(const Edge& e) const {
    return std::hash<std::uint64_t>()((std::uint64_t(e.u) << 32) | std::uint32_t(e.v));
  }
};

using EdgeSet = std::unordered_set<Edge, EdgeHash>;

// Immutable attributed graph: node features plus an undirected simple edge
// set. Isolated nodes are kept so indices stay stable under edge removal.
class Graph {
 public:
  Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor features);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  const std::vector<int>& degrees() const { return degrees_; }
  const Tensor& features() const { return features_; }
  bool has_edge(int a, int b) const;
  double mean_degree() const;

 private:
  std::size_t num_nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> degrees_;
  EdgeSet edge_set_;
  Tensor features_;
};

// Per-edge symmetric normalization rho_vu = 1/sqrt(d_v * d_u).
class NormalizedAdjacency {
 public:
  explicit NormalizedAdjacency(const Graph& g);
  double weight(const Edge& e) const;  // throws ContractError if edge unknown
  const std::vector<double>& weights() const { return weights_; }  // parallel to g.edges()

 private:
  std::vector<double> weights_;
  std::unordered_map<Edge, double, EdgeHash> by_edge_;
};

NormalizedAdjacency symmetric_normalize(const Graph& g);

// Disjoint edge sets for one unlearning experiment. retain and forget
// partition the graph's edges; test_pos is the retain subset used for
// utility evaluation; test_neg are sampled non-edges (kept out of all
// training-time negative sampling, so they double as the untrained set).
struct EdgeSplit {
  std::vector<Edge> retain;
  std::vector<Edge> forget;
  std::vector<Edge> test_pos;
  std::vector<Edge> test_neg;

  bool is_forget(const Edge& e) const { return forget_set_.count(e) > 0; }
  bool is_retain(const Edge& e) const { return retain_set_.count(e) > 0; }
  void rebuild_index();

 private:
  EdgeSet forget_set_;
  EdgeSet retain_set_;
};

enum class ForgetStrategy { random, high_influence };

struct InfluenceMap;  // influence.hpp

// Partitions g.edges() into forget/retain. Forget size is
// round-half-up(ratio * |E|), at least 1 when ratio > 0. high_influence
// picks the edges with the largest xi. test_neg is sampled uniformly from
// non-edges without replacement, |test_neg| = |test_pos|.
EdgeSplit select_forget_set(const Graph& g, double ratio, ForgetStrategy strategy,
                            const InfluenceMap* influence, std::uint64_t rng_seed,
                            double test_fraction = 0.1);

// Graph with every edge incident to v removed; v stays as an isolated
// placeholder so node indices are stable.
Graph remove_node_view(const Graph& g, int v);

// Edge-list text format: one "u v" pair per line, 0-based ids, '#' comments.
// With no feature file, features default to one-hot identity, capped at
// max_feature_dim via a seeded random projection.
Graph load_edge_list(const std::string& path,
                     const std::optional<std::string>& feature_path = std::nullopt,
                     int max_feature_dim = 128, std::uint64_t feature_seed = 0);

std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::uint64_t seed,
                                   const EdgeSet& exclude = {});

// Seeded synthetic generators (identity features, capped as above).
Graph generate_sbm(int n, int blocks, double p_in, double p_out, std::uint64_t seed,
                   int max_feature_dim = 128);
Graph generate_erdos_renyi(int n, double p, std::uint64_t seed, int max_feature_dim = 128);

Tensor identity_features(std::size_t n, int max_feature_dim, std::uint64_t seed);

// Stable per-purpose substream of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag);

}  // namespace inpo
