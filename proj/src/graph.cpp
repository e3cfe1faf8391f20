#include "inpo/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "inpo/error.hpp"
#include "inpo/influence.hpp"

namespace inpo {

Edge make_edge(int a, int b) {
  if (a == b) throw ValidationError("self-loop edge (" + std::to_string(a) + ")");
  if (a < 0 || b < 0) throw ValidationError("negative node id");
  return a < b ? Edge{a, b} : Edge{b, a};
}

Graph::Graph(std::size_t num_nodes, std::vector<Edge> edges, Tensor features)
    : num_nodes_(num_nodes), features_(std::move(features)) {
  if (features_.rows() != num_nodes_)
    throw ValidationError("feature rows != num_nodes");
  neighbors_.resize(num_nodes_);
  degrees_.assign(num_nodes_, 0);
  edges_.reserve(edges.size());
  for (const Edge& raw : edges) {
    Edge e = make_edge(raw.u, raw.v);
    if (static_cast<std::size_t>(e.v) >= num_nodes_)
      throw ValidationError("edge endpoint " + std::to_string(e.v) + " out of range");
    if (!edge_set_.insert(e).second) continue;  // collapse duplicates
    edges_.push_back(e);
    neighbors_[e.u].push_back(e.v);
    neighbors_[e.v].push_back(e.u);
  }
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    std::sort(neighbors_[v].begin(), neighbors_[v].end());
    degrees_[v] = static_cast<int>(neighbors_[v].size());
  }
}

bool Graph::has_edge(int a, int b) const {
  if (a == b) return false;
  return edge_set_.count(a < b ? Edge{a, b} : Edge{b, a}) > 0;
}

double Graph::mean_degree() const {
  if (num_nodes_ == 0) return 0;
  return 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(num_nodes_);
}

NormalizedAdjacency::NormalizedAdjacency(const Graph& g) {
  weights_.reserve(g.num_edges());
  for (const Edge& e : g.edges()) {
    const double d = std::sqrt(static_cast<double>(g.degrees()[e.u]) *
                               static_cast<double>(g.degrees()[e.v]));
    const double w = 1.0 / d;
    weights_.push_back(w);
    by_edge_.emplace(e, w);
  }
}

double NormalizedAdjacency::weight(const Edge& e) const {
  auto it = by_edge_.find(e);
  if (it == by_edge_.end()) throw ContractError("edge not in adjacency");
  return it->second;
}

NormalizedAdjacency symmetric_normalize(const Graph& g) { return NormalizedAdjacency(g); }

void EdgeSplit::rebuild_index() {
  forget_set_.clear();
  retain_set_.clear();
  forget_set_.insert(forget.begin(), forget.end());
  retain_set_.insert(retain.begin(), retain.end());
}

EdgeSplit select_forget_set(const Graph& g, double ratio, ForgetStrategy strategy,
                            const InfluenceMap* influence, std::uint64_t rng_seed,
                            double test_fraction) {
  if (ratio < 0 || ratio > 1) throw ConfigError("delete ratio must be in [0,1]");
  if (strategy == ForgetStrategy::high_influence && influence == nullptr)
    throw ConfigError("high_influence strategy requires an influence map");

  const std::size_t m = g.num_edges();
  std::size_t forget_count = 0;
  if (ratio > 0 && m > 0)
    forget_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(m))));
  forget_count = std::min(forget_count, m);

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;

  if (strategy == ForgetStrategy::random) {
    std::mt19937_64 rng(derive_seed(rng_seed, "forget"));
    std::shuffle(order.begin(), order.end(), rng);
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return influence->edge_score(g.edges()[a]) > influence->edge_score(g.edges()[b]);
    });
  }

  EdgeSplit split;
  for (std::size_t i = 0; i < m; ++i) {
    const Edge& e = g.edges()[order[i]];
    if (i < forget_count)
      split.forget.push_back(e);
    else
      split.retain.push_back(e);
  }

  // Held-out retain subset for utility evaluation (the retain set itself
  // stays in training; see run metadata).
  std::size_t test_count = 0;
  if (!split.retain.empty())
    test_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(test_fraction * split.retain.size())));
  std::vector<std::size_t> ridx(split.retain.size());
  for (std::size_t i = 0; i < ridx.size(); ++i) ridx[i] = i;
  std::mt19937_64 test_rng(derive_seed(rng_seed, "test-pos"));
  std::shuffle(ridx.begin(), ridx.end(), test_rng);
  for (std::size_t i = 0; i < test_count; ++i)
    split.test_pos.push_back(split.retain[ridx[i]]);

  // test_neg depends only on (graph, seed, count), not on the forget
  // strategy, so pretraining and unlearning reserve the same pool.
  split.test_neg = sample_non_edges(g, test_count, derive_seed(rng_seed, "test-neg"));
  split.rebuild_index();
  return split;
}

std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::uint64_t seed,
                                   const EdgeSet& exclude) {
  const std::size_t n = g.num_nodes();
  if (n < 2) throw ValidationError("cannot sample non-edges with < 2 nodes");
  const std::size_t all_pairs = n * (n - 1) / 2;
  if (count > all_pairs - g.num_edges())
    throw ValidationError("not enough non-edges to sample");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
  std::vector<Edge> out;
  EdgeSet seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 200 * (count + 16);
  while (out.size() < count && attempts < max_attempts) {
    ++attempts;
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    Edge e = make_edge(a, b);
    if (g.has_edge(e.u, e.v) || exclude.count(e) || seen.count(e)) continue;
    seen.insert(e);
    out.push_back(e);
  }
  if (out.size() < count) {
    // Dense fallback: enumerate and shuffle the remaining non-edges.
    std::vector<Edge> pool;
    for (int a = 0; a < static_cast<int>(n); ++a)
      for (int b = a + 1; b < static_cast<int>(n); ++b) {
        Edge e{a, b};
        if (!g.has_edge(a, b) && !exclude.count(e) && !seen.count(e)) pool.push_back(e);
      }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (const Edge& e : pool) {
      if (out.size() == count) break;
      out.push_back(e);
    }
  }
  return out;
}

Graph remove_node_view(const Graph& g, int v) {
  if (v < 0 || static_cast<std::size_t>(v) >= g.num_nodes())
    throw ValidationError("remove_node_view: node out of range");
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  for (const Edge& e : g.edges())
    if (e.u != v && e.v != v) kept.push_back(e);
  return Graph(g.num_nodes(), std::move(kept), g.features());
}

Tensor identity_features(std::size_t n, int max_feature_dim, std::uint64_t seed) {
  if (max_feature_dim <= 0) throw ConfigError("max_feature_dim must be positive");
  if (n <= static_cast<std::size_t>(max_feature_dim)) return Tensor::identity(n);
  // Random projection of the identity: each node gets a seeded gaussian row.
  const std::size_t d = static_cast<std::size_t>(max_feature_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<real_t> dist(0, 1);
  Tensor f(n, d);
  const real_t s = real_t(1) / std::sqrt(static_cast<real_t>(d));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng) * s;
  return f;
}

Graph load_edge_list(const std::string& path, const std::optional<std::string>& feature_path,
                     int max_feature_dim, std::uint64_t feature_seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list: " + path);
  std::vector<Edge> edges;
  long long max_node = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    auto hash = sv.find('#');
    if (hash != std::string_view::npos) sv = sv.substr(0, hash);
    std::string body(sv);
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(body);
    long long a, b;
    std::string extra;
    if (!(ls >> a >> b) || (ls >> extra))
      throw ParseError("line " + std::to_string(lineno) + ": expected \"u v\"");
    if (a < 0 || b < 0)
      throw ValidationError("line " + std::to_string(lineno) + ": negative node id");
    if (a == b)
      throw ValidationError("line " + std::to_string(lineno) + ": self-loop");
    edges.push_back(make_edge(static_cast<int>(a), static_cast<int>(b)));
    max_node = std::max({max_node, a, b});
  }
  std::size_t n = static_cast<std::size_t>(max_node + 1);

  Tensor features;
  if (feature_path) {
    std::ifstream fin(*feature_path);
    if (!fin) throw IoError("cannot open feature file: " + *feature_path);
    std::vector<std::vector<real_t>> rows;
    std::size_t cols = 0, fline = 0;
    while (std::getline(fin, line)) {
      ++fline;
      std::istringstream ls(line);
      std::vector<real_t> row;
      real_t v;
      while (ls >> v) row.push_back(v);
      if (row.empty()) continue;
      if (cols == 0) cols = row.size();
      if (row.size() != cols)
        throw ParseError("feature line " + std::to_string(fline) + ": ragged row");
      rows.push_back(std::move(row));
    }
    // Feature rows define the node count; trailing rows are isolated nodes.
    if (rows.size() < n)
      throw ValidationError("feature file has " + std::to_string(rows.size()) +
                            " rows, but edge list references node " +
                            std::to_string(max_node));
    n = rows.size();
    features = Tensor(n, cols);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cols; ++c) features.at(r, c) = rows[r][c];
  } else {
    features = identity_features(n, max_feature_dim, feature_seed);
  }
  return Graph(n, std::move(edges), std::move(features));
}

Graph generate_sbm(int n, int blocks, double p_in, double p_out, std::uint64_t seed,
                   int max_feature_dim) {
  if (n <= 0 || blocks <= 0 || blocks > n) throw ConfigError("bad SBM parameters");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int per_block = (n + blocks - 1) / blocks;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = (i / per_block == j / per_block) ? p_in : p_out;
      if (coin(rng) < p) edges.push_back(Edge{i, j});
    }
  return Graph(static_cast<std::size_t>(n), std::move(edges),
               identity_features(static_cast<std::size_t>(n), max_feature_dim, seed));
}

Graph generate_erdos_renyi(int n, double p, std::uint64_t seed, int max_feature_dim) {
  return generate_sbm(n, 1, p, p, seed, max_feature_dim);
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  // FNV-1a over the tag, then a splitmix64 scramble.
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace inpo
