#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "inpo/graph.hpp"

namespace inpo {

struct GcnModel;

// Defaults follow the NORA reference settings.
struct NoraHyper {
  double k1 = 1.0;
  double k2 = 0.5;
  double k2_prime = 0.0;
  double k3 = 1.0;
  double gamma = 8.0;
};

enum class InfluenceNormalization { raw, minmax };

// Per-node scores F(v) plus per-edge scores xi_ij = F(v_i) + F(v_j),
// optionally min-max normalized over all edges so exp(+-q*xi) stays bounded.
struct InfluenceMap {
  std::vector<double> node_influence;
  std::unordered_map<Edge, double, EdgeHash> edge_influence;
  InfluenceNormalization normalization = InfluenceNormalization::raw;

  double edge_score(const Edge& e) const;  // throws ContractError if missing
};

// Removal-based influence of node v (Eq.-4-style oracle): L1 difference of
// final-layer outputs over all other nodes, between the full graph and the
// graph with v's edges removed. Two forward passes.
double brute_force_node_influence(const Graph& g, const GcnModel& model, int v);

// Gradient approximation of removal influence for all nodes from a single
// forward/backward pass.
std::vector<double> nora_node_influence(const Graph& g, const GcnModel& model,
                                        const NoraHyper& hyper = {});

// Degree-correction term for removing r: effect of the degree drop of r's
// neighbors on their neighbors' normalized messages.
double delta_topology(const Graph& g, int r, const NoraHyper& hyper = {});

double edge_influence(const std::vector<double>& node_influence, const Edge& e);

InfluenceMap build_influence_map(const Graph& g, std::vector<double> node_influence,
                                 InfluenceNormalization norm = InfluenceNormalization::minmax);

void write_influence_csv(const InfluenceMap& map, const std::string& node_path,
                         const std::string& edge_path);

}  // namespace inpo
