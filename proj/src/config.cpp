#include "inpo/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "inpo/error.hpp"

namespace inpo {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": " + v);
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean value for " + key + ": " + v);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "beta=" << format_double(c.beta) << "\n"
     << "delete_op=" << c.delete_op << "\n"
     << "delete_op_rank=" << c.delete_op_rank << "\n"
     << "delete_ratio=" << format_double(c.delete_ratio) << "\n"
     << "epochs=" << c.epochs << "\n"
     << "features=" << c.features << "\n"
     << "graph=" << c.graph << "\n"
     << "hidden_dim=" << c.hidden_dim << "\n"
     << "inpos_use_gd=" << (c.inpos_use_gd ? "true" : "false") << "\n"
     << "kl_reverse=" << (c.kl_reverse ? "true" : "false") << "\n"
     << "lambda1=" << format_double(c.lambda1) << "\n"
     << "lambda2=" << format_double(c.lambda2) << "\n"
     << "lambda3=" << format_double(c.lambda3) << "\n"
     << "lr=" << format_double(c.lr) << "\n"
     << "max_feature_dim=" << c.max_feature_dim << "\n"
     << "message_mode=" << c.message_mode << "\n"
     << "mode=" << c.mode << "\n"
     << "optimizer=" << c.optimizer << "\n"
     << "out_dim=" << c.out_dim << "\n"
     << "out_dir=" << c.out_dir << "\n"
     << "pretrain_epochs=" << c.pretrain_epochs << "\n"
     << "q=" << format_double(c.q) << "\n"
     << "seed=" << c.seed << "\n"
     << "strategy=" << c.strategy << "\n"
     << "test_fraction=" << format_double(c.test_fraction) << "\n";
  return os.str();
}

void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "beta") c.beta = to_double(key, value);
  else if (key == "delete_op") c.delete_op = value;
  else if (key == "delete_op_rank") c.delete_op_rank = static_cast<int>(to_int(key, value));
  else if (key == "delete_ratio") c.delete_ratio = to_double(key, value);
  else if (key == "epochs") c.epochs = static_cast<int>(to_int(key, value));
  else if (key == "features") c.features = value;
  else if (key == "graph") c.graph = value;
  else if (key == "hidden_dim") c.hidden_dim = static_cast<int>(to_int(key, value));
  else if (key == "inpos_use_gd") c.inpos_use_gd = to_bool(key, value);
  else if (key == "kl_reverse") c.kl_reverse = to_bool(key, value);
  else if (key == "lambda1") c.lambda1 = to_double(key, value);
  else if (key == "lambda2") c.lambda2 = to_double(key, value);
  else if (key == "lambda3") c.lambda3 = to_double(key, value);
  else if (key == "lr") c.lr = to_double(key, value);
  else if (key == "max_feature_dim") c.max_feature_dim = static_cast<int>(to_int(key, value));
  else if (key == "message_mode") c.message_mode = value;
  else if (key == "mode") c.mode = value;
  else if (key == "optimizer") c.optimizer = value;
  else if (key == "out_dim") c.out_dim = static_cast<int>(to_int(key, value));
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "pretrain_epochs") c.pretrain_epochs = static_cast<int>(to_int(key, value));
  else if (key == "q") c.q = to_double(key, value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, value));
  else if (key == "strategy") c.strategy = value;
  else if (key == "test_fraction") c.test_fraction = to_double(key, value);
  else throw ConfigError("unknown config key: " + key);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    set_config_key(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << serialize_config(cfg);
}

std::string config_hash(const ExperimentConfig& cfg, const std::string& command) {
  const std::string text = command + "\n" + serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

namespace {
// Parses "kind,k1=v1,k2=v2" graph specs.
std::map<std::string, std::string> spec_params(const std::string& spec, std::string& kind) {
  std::map<std::string, std::string> params;
  std::istringstream in(spec);
  std::string tok;
  bool first = true;
  while (std::getline(in, tok, ',')) {
    if (first) {
      kind = tok;
      first = false;
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad graph spec token: " + tok);
    params[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  if (first) throw ConfigError("empty graph spec");
  return params;
}

std::string take(std::map<std::string, std::string>& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw ConfigError("graph spec missing " + key);
  std::string v = it->second;
  params.erase(it);
  return v;
}
}  // namespace

Graph build_graph(const ExperimentConfig& cfg) {
  std::string kind;
  auto params = spec_params(cfg.graph, kind);
  auto reject_leftovers = [&]() {
    if (!params.empty()) throw ConfigError("unknown graph spec key: " + params.begin()->first);
  };
  if (kind == "sbm") {
    const int n = static_cast<int>(to_int("n", take(params, "n")));
    const int blocks = static_cast<int>(to_int("blocks", take(params, "blocks")));
    const double p_in = to_double("p_in", take(params, "p_in"));
    const double p_out = to_double("p_out", take(params, "p_out"));
    const auto seed = static_cast<std::uint64_t>(to_int("seed", take(params, "seed")));
    reject_leftovers();
    return generate_sbm(n, blocks, p_in, p_out, seed, cfg.max_feature_dim);
  }
  if (kind == "er") {
    const int n = static_cast<int>(to_int("n", take(params, "n")));
    const double p = to_double("p", take(params, "p"));
    const auto seed = static_cast<std::uint64_t>(to_int("seed", take(params, "seed")));
    reject_leftovers();
    return generate_erdos_renyi(n, p, seed, cfg.max_feature_dim);
  }
  if (kind == "file") {
    const std::string path = take(params, "path");
    reject_leftovers();
    std::optional<std::string> features;
    if (!cfg.features.empty()) features = cfg.features;
    return load_edge_list(path, features, cfg.max_feature_dim, cfg.seed);
  }
  throw ConfigError("unknown graph kind: " + kind);
}

ForgetStrategy parse_strategy(const std::string& s) {
  if (s == "random") return ForgetStrategy::random;
  if (s == "high_influence") return ForgetStrategy::high_influence;
  throw ConfigError("unknown strategy: " + s);
}

namespace {
OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer: " + s);
}

MessageKind parse_message_kind(const std::string& s) {
  if (s == "standard") return MessageKind::standard;
  if (s == "forget_boost") return MessageKind::influence_forget_boost;
  if (s == "retain_damp") return MessageKind::influence_retain_damp;
  throw ConfigError("unknown message mode: " + s);
}
}  // namespace

TrainConfig train_config_for_pretrain(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.pretrain_epochs;
  t.lr = cfg.lr;
  t.seed = cfg.seed;
  t.hidden_dim = static_cast<std::size_t>(cfg.hidden_dim);
  t.out_dim = static_cast<std::size_t>(cfg.out_dim);
  t.optimizer = parse_optimizer(cfg.optimizer);
  return t;
}

TrainConfig train_config_for_unlearn(const ExperimentConfig& cfg) {
  TrainConfig t = train_config_for_pretrain(cfg);
  t.epochs = cfg.epochs;
  t.mode = parse_run_mode(cfg.mode);
  t.message_kind = parse_message_kind(cfg.message_mode);
  t.q = cfg.q;
  t.low_rank_ops = cfg.delete_op == "low_rank";
  if (cfg.delete_op != "full" && cfg.delete_op != "low_rank")
    throw ConfigError("unknown delete_op: " + cfg.delete_op);
  t.op_rank = static_cast<std::size_t>(cfg.delete_op_rank);
  t.inpos_use_gd = cfg.inpos_use_gd;
  t.kl_reverse = cfg.kl_reverse;
  return t;
}

LossWeights loss_weights(const ExperimentConfig& cfg) {
  LossWeights w;
  w.lambda1 = cfg.lambda1;
  w.lambda2 = cfg.lambda2;
  w.lambda3 = cfg.lambda3;
  w.beta = cfg.beta;
  return w;
}

}  // namespace inpo
