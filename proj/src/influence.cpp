#include "inpo/influence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "inpo/error.hpp"
#include "inpo/gnn.hpp"

namespace inpo {

double InfluenceMap::edge_score(const Edge& e) const {
  auto it = edge_influence.find(e);
  if (it == edge_influence.end()) throw ContractError("edge missing from influence map");
  return it->second;
}

double brute_force_node_influence(const Graph& g, const GcnModel& model, int v) {
  if (v < 0 || static_cast<std::size_t>(v) >= g.num_nodes())
    throw ValidationError("node out of range");
  const Tensor full = gcn_forward(g, symmetric_normalize(g), model);
  const Graph removed = remove_node_view(g, v);
  const Tensor without = gcn_forward(removed, symmetric_normalize(removed), model);
  double total = 0;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (static_cast<int>(i) == v) continue;
    for (std::size_t c = 0; c < full.cols(); ++c)
      total += std::abs(full.at(i, c) - without.at(i, c));
  }
  return total;
}

double delta_topology(const Graph& g, int r, const NoraHyper& hyper) {
  if (r < 0 || static_cast<std::size_t>(r) >= g.num_nodes())
    throw ValidationError("node out of range");
  const auto& deg = g.degrees();
  double total = 0;
  for (int i : g.neighbors()[r]) {
    const double di = deg[i];
    // Degree after removing r, floored at 1 to keep the term finite.
    const double di_minus = std::max(di - 1.0, 1.0);
    const double factor = hyper.k1 * (1.0 / std::sqrt(di_minus) - 1.0 / std::sqrt(di)) +
                          (1.0 - hyper.k1) * (1.0 / di_minus - 1.0 / di);
    for (int j : g.neighbors()[i]) {
      if (j == r) continue;
      const double dj = deg[j];
      total += factor * (hyper.k2 / std::sqrt(dj) + hyper.k2_prime / dj +
                         (1.0 - hyper.k2 - hyper.k2_prime));
    }
  }
  return total;
}

std::vector<double> nora_node_influence(const Graph& g, const GcnModel& model,
                                        const NoraHyper& hyper) {
  const std::size_t n = g.num_nodes();
  std::vector<double> scores(n, 0.0);
  if (n == 0) return scores;

  // One taped forward; the backward seed is phi = 0.5 * ||sum_v h_v^(L)||^2,
  // whose gradient at layer output row r is the vector-Jacobian product
  // f * df/dh_r^(i) evaluated for all nodes at once.
  ag::Tape tape;
  NormalizedAdjacency adj = symmetric_normalize(g);
  MessageGraph mg = build_message_graph(g, adj, MessageMode::standard(), nullptr);
  GcnVars vars = register_model(tape, model, TrainScope::none);
  gcn_forward_tape(tape, g, mg, vars, /*retain_layer_grads=*/true);
  ag::Var f = tape.col_sum(vars.layer_outputs.back());
  ag::Var phi = tape.mul_scalar(tape.sum(tape.mul(f, f)), 0.5);
  tape.backward(phi);

  const std::size_t num_layers = vars.layer_outputs.size();
  const auto& deg = g.degrees();
  const double mean_deg = g.mean_degree();

  for (std::size_t r = 0; r < n; ++r) {
    const double dr = deg[r];
    double dhat = 1.0;
    if (n > 1) dhat = 1.0 - dr / ((static_cast<double>(n) - 1.0) * (mean_deg + hyper.gamma));
    const double gate = dr / (dr + hyper.gamma);  // 0 for isolated nodes
    double f_r = 0;
    for (std::size_t i = 0; i < num_layers; ++i) {
      const Tensor& h = tape.value(vars.layer_outputs[i]);
      const Tensor& gh = tape.grad(vars.layer_outputs[i]);
      double l1 = 0;
      for (std::size_t c = 0; c < h.cols(); ++c)
        l1 += std::abs(gh.at(r, c) * h.at(r, c));
      f_r += std::pow(dhat, static_cast<double>(num_layers - 1 - i)) * gate * l1;
    }
    scores[r] = f_r + hyper.k3 * delta_topology(g, static_cast<int>(r), hyper);
  }
  return scores;
}

double edge_influence(const std::vector<double>& node_influence, const Edge& e) {
  if (static_cast<std::size_t>(std::max(e.u, e.v)) >= node_influence.size())
    throw ContractError("edge endpoint not scored");
  return node_influence[e.u] + node_influence[e.v];
}

InfluenceMap build_influence_map(const Graph& g, std::vector<double> node_influence,
                                 InfluenceNormalization norm) {
  if (node_influence.size() != g.num_nodes())
    throw ContractError("node influence size != num_nodes");
  InfluenceMap map;
  map.normalization = norm;
  map.node_influence = std::move(node_influence);

  std::vector<double> raw;
  raw.reserve(g.num_edges());
  for (const Edge& e : g.edges()) raw.push_back(edge_influence(map.node_influence, e));

  if (norm == InfluenceNormalization::minmax && !raw.empty()) {
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    const double span = hi - lo;
    for (double& x : raw) x = span > 0 ? (x - lo) / span : 0.0;
  }
  for (std::size_t i = 0; i < g.num_edges(); ++i)
    map.edge_influence.emplace(g.edges()[i], raw[i]);
  return map;
}

void write_influence_csv(const InfluenceMap& map, const std::string& node_path,
                         const std::string& edge_path) {
  std::ofstream nodes(node_path);
  if (!nodes) throw IoError("cannot write " + node_path);
  nodes << "node_id,score\n";
  nodes.precision(17);
  for (std::size_t v = 0; v < map.node_influence.size(); ++v)
    nodes << v << "," << map.node_influence[v] << "\n";

  std::vector<std::pair<Edge, double>> edges(map.edge_influence.begin(),
                                             map.edge_influence.end());
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return a.first.u != b.first.u ? a.first.u < b.first.u : a.first.v < b.first.v;
  });
  std::ofstream out(edge_path);
  if (!out) throw IoError("cannot write " + edge_path);
  out << "edge_u,edge_v,xi\n";
  out.precision(17);
  for (const auto& [e, xi] : edges) out << e.u << "," << e.v << "," << xi << "\n";
}

}  // namespace inpo
