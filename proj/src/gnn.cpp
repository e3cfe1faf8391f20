#include "inpo/gnn.hpp"

#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <random>

#include "inpo/error.hpp"
#include "inpo/influence.hpp"

namespace inpo {

GcnModel GcnModel::reference_model() const {
  if (!has_reference()) throw ContractError("model has no reference snapshot");
  GcnModel ref;
  ref.layers = reference;
  ref.reference = reference;
  ref.seed = seed;
  return ref;
}

namespace {
Tensor glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const real_t bound = std::sqrt(real_t(6) / static_cast<real_t>(in + out));
  std::uniform_real_distribution<real_t> dist(-bound, bound);
  Tensor w(in, out);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
  return w;
}
}  // namespace

GcnModel init_gcn(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                  std::uint64_t seed, std::size_t num_layers) {
  if (num_layers < 1) throw ConfigError("need at least one layer");
  std::mt19937_64 rng(seed);
  GcnModel m;
  m.seed = seed;
  std::size_t d_in = in_dim;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t d_out = (l + 1 == num_layers) ? out_dim : hidden_dim;
    GcnLayer layer;
    layer.w_self = glorot(d_in, d_out, rng);
    layer.w_neigh = glorot(d_in, d_out, rng);
    m.layers.push_back(std::move(layer));
    d_in = d_out;
  }
  return m;
}

double message_weight(const Edge& e, const NormalizedAdjacency& adj, const MessageMode& mode,
                      const EdgeSplit& split) {
  const double rho = adj.weight(e);
  if (mode.kind == MessageKind::standard || mode.q == 0) return rho;
  if (mode.influence == nullptr) throw ConfigError("influence message mode without map");
  if (mode.kind == MessageKind::influence_forget_boost) {
    if (!split.is_forget(e)) return rho;
    return std::exp(mode.q * mode.influence->edge_score(e)) * rho;
  }
  // retain_damp: forget edges keep rho.
  if (split.is_forget(e)) return rho;
  return std::exp(-mode.q * mode.influence->edge_score(e)) * rho;
}

MessageGraph build_message_graph(const Graph& g, const NormalizedAdjacency& adj,
                                 const MessageMode& mode, const EdgeSplit* split) {
  if (mode.kind != MessageKind::standard && split == nullptr)
    throw ContractError("influence message modes require an edge split");
  MessageGraph mg;
  mg.src.reserve(2 * g.num_edges());
  mg.dst.reserve(2 * g.num_edges());
  mg.weight.reserve(2 * g.num_edges());
  const auto& edges = g.edges();
  const auto& rho = adj.weights();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    real_t w;
    if (mode.kind == MessageKind::standard)
      w = static_cast<real_t>(rho[i]);
    else
      w = static_cast<real_t>(message_weight(e, adj, mode, *split));
    mg.src.push_back(e.u);
    mg.dst.push_back(e.v);
    mg.weight.push_back(w);
    mg.src.push_back(e.v);
    mg.dst.push_back(e.u);
    mg.weight.push_back(w);
  }
  return mg;
}

GcnVars register_model(ag::Tape& tape, const GcnModel& model, TrainScope scope) {
  GcnVars vars;
  const bool train_base = scope == TrainScope::base_weights || scope == TrainScope::all;
  const bool train_ops = scope == TrainScope::delete_ops || scope == TrainScope::all;
  for (const GcnLayer& l : model.layers) {
    GcnVars::LayerVars lv;
    lv.w_self = tape.leaf(l.w_self, train_base);
    lv.w_neigh = tape.leaf(l.w_neigh, train_base);
    vars.layers.push_back(lv);
  }
  for (const DeleteOperator& op : model.delete_ops) {
    GcnVars::OpVars ov;
    ov.low_rank = op.low_rank;
    if (op.low_rank) {
      ov.a = tape.leaf(op.a, train_ops);
      ov.b = tape.leaf(op.b, train_ops);
    } else {
      ov.full = tape.leaf(op.full, train_ops);
    }
    ov.mask.assign(op.affected.begin(), op.affected.end());
    vars.ops.push_back(std::move(ov));
  }
  return vars;
}

ag::Var gcn_forward_tape(ag::Tape& tape, const Graph& g, const MessageGraph& mg,
                         GcnVars& vars, bool retain_layer_grads) {
  if (vars.layers.empty()) throw ContractError("model has no layers");
  if (tape.value(vars.layers.front().w_self).rows() != g.features().cols())
    throw ContractError("feature dim does not match layer-0 input dim");
  if (!vars.ops.empty() && vars.ops.size() != vars.layers.size())
    throw ContractError("delete operator count != layer count");
  ag::Var h = tape.constant(g.features());
  vars.layer_outputs.clear();
  const std::size_t n = g.num_nodes();
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    ag::Var self = tape.matmul(h, vars.layers[l].w_self);
    ag::Var gathered = tape.gather_rows(h, mg.src);
    ag::Var messages = tape.scale_rows(gathered, mg.weight);
    ag::Var agg = tape.scatter_add_rows(messages, mg.dst, n);
    ag::Var neigh = tape.matmul(agg, vars.layers[l].w_neigh);
    h = tape.add(self, neigh);
    if (l + 1 < vars.layers.size()) h = tape.relu(h);
    if (!vars.ops.empty()) {
      GcnVars::OpVars& op = vars.ops[l];
      ag::Var delta = op.low_rank ? tape.matmul(tape.matmul(h, op.a), op.b)
                                  : tape.matmul(h, op.full);
      h = tape.add(h, tape.scale_rows(delta, op.mask));
    }
    if (retain_layer_grads) tape.keep_grad(h);
    vars.layer_outputs.push_back(h);
  }
  return h;
}

Tensor gcn_forward(const Graph& g, const NormalizedAdjacency& adj, const GcnModel& model,
                   const MessageMode& mode, const EdgeSplit* split) {
  ag::Tape tape;
  MessageGraph mg = build_message_graph(g, adj, mode, split);
  GcnVars vars = register_model(tape, model, TrainScope::none);
  ag::Var h = gcn_forward_tape(tape, g, mg, vars);
  return tape.value(h);
}

double predict_edge(const Tensor& embeddings, const Edge& e) {
  if (static_cast<std::size_t>(std::max(e.u, e.v)) >= embeddings.rows())
    throw ContractError("predict_edge: node out of range");
  real_t dot = 0;
  for (std::size_t c = 0; c < embeddings.cols(); ++c)
    dot += embeddings.at(e.u, c) * embeddings.at(e.v, c);
  return dot >= 0 ? 1.0 / (1.0 + std::exp(-dot)) : std::exp(dot) / (1.0 + std::exp(dot));
}

ag::Var predict_edges_tape(ag::Tape& tape, ag::Var embeddings, const std::vector<Edge>& edges) {
  std::vector<int> us, vs;
  us.reserve(edges.size());
  vs.reserve(edges.size());
  for (const Edge& e : edges) {
    us.push_back(e.u);
    vs.push_back(e.v);
  }
  ag::Var hu = tape.gather_rows(embeddings, us);
  ag::Var hv = tape.gather_rows(embeddings, vs);
  return tape.sigmoid(tape.row_dot(hu, hv));
}

std::vector<double> predict_edges(const Tensor& embeddings, const std::vector<Edge>& edges) {
  std::vector<double> out;
  out.reserve(edges.size());
  for (const Edge& e : edges) out.push_back(predict_edge(embeddings, e));
  return out;
}

std::vector<std::uint8_t> affected_nodes(const Graph& g, const std::vector<Edge>& forget,
                                         std::size_t hops) {
  std::vector<std::uint8_t> mask(g.num_nodes(), 0);
  std::deque<std::pair<int, std::size_t>> frontier;
  for (const Edge& e : forget) {
    for (int v : {e.u, e.v}) {
      if (!mask[v]) {
        mask[v] = 1;
        frontier.emplace_back(v, 0);
      }
    }
  }
  while (!frontier.empty()) {
    auto [v, depth] = frontier.front();
    frontier.pop_front();
    if (depth == hops) continue;
    for (int u : g.neighbors()[v]) {
      if (!mask[u]) {
        mask[u] = 1;
        frontier.emplace_back(u, depth + 1);
      }
    }
  }
  return mask;
}

void attach_delete_ops(GcnModel& model, const Graph& g, const std::vector<Edge>& forget,
                       bool low_rank, std::size_t rank, std::uint64_t seed) {
  model.delete_ops.clear();
  auto mask = affected_nodes(g, forget, model.num_layers());
  std::mt19937_64 rng(seed);
  for (const GcnLayer& l : model.layers) {
    const std::size_t d = l.w_self.cols();
    DeleteOperator op;
    op.low_rank = low_rank;
    op.affected = mask;
    if (low_rank) {
      if (rank == 0 || rank > d) throw ConfigError("bad delete-operator rank");
      // a random, b zero: the product starts as the zero map but gradients
      // reach both factors.
      std::normal_distribution<real_t> dist(0, real_t(0.01));
      op.a = Tensor(d, rank);
      for (std::size_t i = 0; i < op.a.size(); ++i) op.a[i] = dist(rng);
      op.b = Tensor(rank, d);
    } else {
      op.full = Tensor(d, d);
    }
    model.delete_ops.push_back(std::move(op));
  }
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4f504e49;  // "INPO"
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ofstream& out, const Tensor& t) {
  write_u64(out, t.rows());
  write_u64(out, t.cols());
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(real_t)));
}

Tensor read_tensor(std::ifstream& in) {
  const std::uint64_t r = read_u64(in);
  const std::uint64_t c = read_u64(in);
  Tensor t(r, c);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(real_t)));
  if (!in) throw CheckpointError("truncated checkpoint tensor");
  return t;
}

}  // namespace

void save_checkpoint(const GcnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  write_u32(out, kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u64(out, model.seed);
  write_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const GcnLayer& l : model.layers) {
    write_tensor(out, l.w_self);
    write_tensor(out, l.w_neigh);
  }
  write_u32(out, model.has_reference() ? 1 : 0);
  for (const GcnLayer& l : model.reference) {
    write_tensor(out, l.w_self);
    write_tensor(out, l.w_neigh);
  }
  write_u32(out, static_cast<std::uint32_t>(model.delete_ops.size()));
  for (const DeleteOperator& op : model.delete_ops) {
    write_u32(out, op.low_rank ? 1 : 0);
    if (op.low_rank) {
      write_tensor(out, op.a);
      write_tensor(out, op.b);
    } else {
      write_tensor(out, op.full);
    }
    write_u64(out, op.affected.size());
    out.write(reinterpret_cast<const char*>(op.affected.data()),
              static_cast<std::streamsize>(op.affected.size()));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

GcnModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  if (read_u32(in) != kCheckpointMagic) throw CheckpointError("not a checkpoint file");
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  GcnModel m;
  m.seed = read_u64(in);
  const std::uint32_t n_layers = read_u32(in);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    GcnLayer l;
    l.w_self = read_tensor(in);
    l.w_neigh = read_tensor(in);
    m.layers.push_back(std::move(l));
  }
  if (read_u32(in)) {
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      GcnLayer l;
      l.w_self = read_tensor(in);
      l.w_neigh = read_tensor(in);
      m.reference.push_back(std::move(l));
    }
  }
  const std::uint32_t n_ops = read_u32(in);
  for (std::uint32_t i = 0; i < n_ops; ++i) {
    DeleteOperator op;
    op.low_rank = read_u32(in) != 0;
    if (op.low_rank) {
      op.a = read_tensor(in);
      op.b = read_tensor(in);
    } else {
      op.full = read_tensor(in);
    }
    const std::uint64_t mask_size = read_u64(in);
    op.affected.resize(mask_size);
    in.read(reinterpret_cast<char*>(op.affected.data()),
            static_cast<std::streamsize>(mask_size));
    m.delete_ops.push_back(std::move(op));
  }
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
  return m;
}

}  // namespace inpo
