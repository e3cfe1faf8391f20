#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inpo/autograd.hpp"
#include "inpo/graph.hpp"
#include "inpo/tensor.hpp"

namespace inpo {

struct InfluenceMap;

// One GCN layer: self and neighbor weight matrices, stored [d_in x d_out].
struct GcnLayer {
  Tensor w_self;
  Tensor w_neigh;
};

// Zero-initialized per-layer transformation trained during INPO-S while the
// base weights stay frozen. Applied additively to the affected rows:
// h' = h + op(h). At init the operator is the zero map, so the model
// reproduces the reference output exactly.
struct DeleteOperator {
  bool low_rank = false;
  Tensor full;             // [d x d], zero at init
  Tensor a;                // [d x r], seeded small random at init
  Tensor b;                // [r x d], zero at init (so a*b = 0)
  std::vector<std::uint8_t> affected;  // per-node 0/1 mask

  std::size_t dim() const { return low_rank ? a.rows() : full.rows(); }
};

struct GcnModel {
  std::vector<GcnLayer> layers;
  std::vector<DeleteOperator> delete_ops;  // empty, or one per layer
  std::vector<GcnLayer> reference;         // frozen snapshot of pretrained weights
  std::uint64_t seed = 0;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().w_self.rows(); }
  std::size_t output_dim() const { return layers.back().w_self.cols(); }
  bool has_reference() const { return !reference.empty(); }
  void freeze_reference() { reference = layers; }
  // The pretrained model: reference weights, no delete operators.
  GcnModel reference_model() const;
};

// Seeded Glorot-uniform initialization, two layers by default.
GcnModel init_gcn(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                  std::uint64_t seed, std::size_t num_layers = 2);

enum class MessageKind { standard, influence_forget_boost, influence_retain_damp };

struct MessageMode {
  MessageKind kind = MessageKind::standard;
  double q = 1.0;
  const InfluenceMap* influence = nullptr;

  static MessageMode standard() { return {}; }
};

// Per-edge message weight. standard: rho. forget_boost: exp(q*xi)*rho on
// forget edges, rho elsewhere. retain_damp: exp(-q*xi)*rho on retain edges,
// rho on forget edges. q = 0 reduces every mode to standard.
double message_weight(const Edge& e, const NormalizedAdjacency& adj, const MessageMode& mode,
                      const EdgeSplit& split);

// Directed message arrays (both directions per undirected edge).
struct MessageGraph {
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<real_t> weight;
};

MessageGraph build_message_graph(const Graph& g, const NormalizedAdjacency& adj,
                                 const MessageMode& mode, const EdgeSplit* split);

// Model weights registered on a tape. Delete-operator vars are present only
// when the model carries operators.
struct GcnVars {
  struct LayerVars {
    ag::Var w_self, w_neigh;
  };
  struct OpVars {
    bool low_rank = false;
    ag::Var full, a, b;
    std::vector<real_t> mask;  // affected rows as 0/1 scale weights
  };
  std::vector<LayerVars> layers;
  std::vector<OpVars> ops;
  std::vector<ag::Var> layer_outputs;  // populated by gcn_forward_tape
};

enum class TrainScope { none, base_weights, delete_ops, all };

GcnVars register_model(ag::Tape& tape, const GcnModel& model, TrainScope scope);

// Two-branch GCN propagation: per layer
//   h_v = ReLU(W_self h_v + W_neigh sum_{u in N(v)} m_vu h_u)
// with no activation on the last layer, followed by the additive delete
// operator on affected rows when present. Returns final embeddings.
// retain_layer_grads keeps gradients on every layer output even when no
// leaf weight requires one (NORA reads them).
ag::Var gcn_forward_tape(ag::Tape& tape, const Graph& g, const MessageGraph& mg,
                         GcnVars& vars, bool retain_layer_grads = false);

// Convenience non-training forward.
Tensor gcn_forward(const Graph& g, const NormalizedAdjacency& adj, const GcnModel& model,
                   const MessageMode& mode = MessageMode::standard(),
                   const EdgeSplit* split = nullptr);

// Dot-product decoder: sigma(h_v . h_u).
double predict_edge(const Tensor& embeddings, const Edge& e);

// sigma(h_v . h_u) for a list of edges on the tape, as an [m x 1] Var.
ag::Var predict_edges_tape(ag::Tape& tape, ag::Var embeddings, const std::vector<Edge>& edges);

std::vector<double> predict_edges(const Tensor& embeddings, const std::vector<Edge>& edges);

// Nodes within `hops` of any forget-edge endpoint (the delete operators'
// support).
std::vector<std::uint8_t> affected_nodes(const Graph& g, const std::vector<Edge>& forget,
                                         std::size_t hops);

void attach_delete_ops(GcnModel& model, const Graph& g, const std::vector<Edge>& forget,
                       bool low_rank, std::size_t rank, std::uint64_t seed);

// Versioned binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const GcnModel& model, const std::string& path);
GcnModel load_checkpoint(const std::string& path);

}  // namespace inpo
