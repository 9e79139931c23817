#include "lrpx/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "lrpx/rng.hpp"

namespace lrpx {

using nlohmann::json;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Name/shape skeleton shared by init and load so the parameter order is a
// single source of truth.
std::vector<Param> make_skeleton(const ModelConfig& c) {
  std::vector<Param> ps;
  auto push = [&ps](std::string name, int r, int co) {
    Param p;
    p.name = std::move(name);
    p.shape = {r, co};
    p.values.assign(static_cast<std::size_t>(r) * co, 0.0);
    ps.push_back(std::move(p));
  };
  push("embed.tokens", c.vocab_size, c.d_model);
  if (c.positional_encoding == PositionalEncoding::kLearned) {
    push("embed.positions", c.max_seq_len, c.d_model);
  }
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string lp = "layers." + std::to_string(l) + ".";
    for (int h = 0; h < c.n_heads; ++h) {
      const std::string hp = lp + "heads." + std::to_string(h) + ".";
      push(hp + "w_q", c.d_model, c.d_k);
      push(hp + "w_k", c.d_model, c.d_k);
      push(hp + "w_v", c.d_model, c.d_k);
      push(hp + "w_o", c.d_k, c.d_model);
    }
    push(lp + "ln1.gamma", 1, c.d_model);
    push(lp + "ln1.beta", 1, c.d_model);
    push(lp + "ffn.w1", c.d_model, c.d_ff);
    push(lp + "ffn.b1", 1, c.d_ff);
    push(lp + "ffn.w2", c.d_ff, c.d_model);
    push(lp + "ffn.b2", 1, c.d_model);
    push(lp + "ln2.gamma", 1, c.d_model);
    push(lp + "ln2.beta", 1, c.d_model);
  }
  push("classifier.weight", c.d_model, c.n_classes);
  push("classifier.bias", 1, c.n_classes);
  return ps;
}

bool is_bias_name(const std::string& name) {
  auto ends_with = [&name](const char* suf) {
    const std::string s(suf);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".b1") || ends_with(".b2") || ends_with(".beta") ||
         name == "classifier.bias";
}

std::vector<double> sinusoidal_pe(int n, int d) {
  std::vector<double> pe(static_cast<std::size_t>(n) * d, 0.0);
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos * std::exp(-std::log(10000.0) * (static_cast<double>(i) / d));
      pe[static_cast<std::size_t>(pos) * d + i] = std::sin(angle);
      if (i + 1 < d) pe[static_cast<std::size_t>(pos) * d + i + 1] = std::cos(angle);
    }
  }
  return pe;
}

// --- checkpoint field helpers ---------------------------------------------

[[noreturn]] void format_error(const std::string& field, const std::string& what) {
  throw std::runtime_error("checkpoint: field '" + field + "' " + what);
}

const json& get_field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object() || !j.contains(key)) format_error(path + key, "is missing");
  return j.at(key);
}

int get_int(const json& j, const std::string& path, const char* key) {
  const json& f = get_field(j, path, key);
  if (!f.is_number_integer()) format_error(path + key, "is not an integer");
  return f.get<int>();
}

double get_double(const json& j, const std::string& path, const char* key) {
  const json& f = get_field(j, path, key);
  if (!f.is_number()) format_error(path + key, "is not a number");
  return f.get<double>();
}

std::string get_string(const json& j, const std::string& path, const char* key) {
  const json& f = get_field(j, path, key);
  if (!f.is_string()) format_error(path + key, "is not a string");
  return f.get<std::string>();
}

}  // namespace

bool detaches_gates(DetachMode m) { return m == DetachMode::kAh || m == DetachMode::kAhLn; }
bool detaches_ln_scale(DetachMode m) { return m == DetachMode::kLn || m == DetachMode::kAhLn; }

std::string to_string(DetachMode m) {
  switch (m) {
    case DetachMode::kNone: return "none";
    case DetachMode::kAh: return "ah";
    case DetachMode::kLn: return "ln";
    case DetachMode::kAhLn: return "ah_ln";
  }
  return "none";
}

DetachMode detach_mode_from_string(const std::string& s) {
  if (s == "none") return DetachMode::kNone;
  if (s == "ah") return DetachMode::kAh;
  if (s == "ln") return DetachMode::kLn;
  if (s == "ah_ln") return DetachMode::kAhLn;
  throw std::invalid_argument("unknown detach mode '" + s + "'");
}

void ModelConfig::validate() const {
  require(vocab_size >= 1, "config.vocab_size must be >= 1");
  require(d_model >= 1, "config.d_model must be >= 1");
  require(n_heads >= 1, "config.n_heads must be >= 1");
  require(d_k >= 1, "config.d_k must be >= 1");
  require(n_layers >= 1, "config.n_layers must be >= 1");
  require(d_ff >= 1, "config.d_ff must be >= 1");
  require(max_seq_len >= 1, "config.max_seq_len must be >= 1");
  require(n_classes >= 1, "config.n_classes must be >= 1");
  require(d_model == n_heads * d_k, "config.d_model must equal n_heads * d_k");
  require(eps_ln > 0.0, "config.eps_ln must be > 0");
}

Param& TransformerModel::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw std::invalid_argument("no parameter named '" + name + "'");
}

const Param& TransformerModel::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw std::invalid_argument("no parameter named '" + name + "'");
}

void TransformerModel::zero_biases() {
  for (auto& p : params) {
    if (is_bias_name(p.name)) std::fill(p.values.begin(), p.values.end(), 0.0);
  }
}

TransformerModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TransformerModel m;
  m.config = config;
  m.rng_seed = seed;
  m.params = make_skeleton(config);
  Rng rng(seed);
  for (auto& p : m.params) {
    if (p.name == "embed.tokens" || p.name == "embed.positions") {
      const double limit = std::sqrt(3.0 / config.d_model);
      for (auto& v : p.values) v = rng.uniform(-limit, limit);
    } else if (p.name.find("gamma") != std::string::npos) {
      std::fill(p.values.begin(), p.values.end(), 1.0);
    } else if (is_bias_name(p.name)) {
      // stays zero
    } else {
      const double limit = std::sqrt(6.0 / (p.shape[0] + p.shape[1]));
      for (auto& v : p.values) v = rng.uniform(-limit, limit);
    }
  }
  return m;
}

Tensor attention_head(Graph& g, Tensor x, Tensor xq, Tensor wk, Tensor wq, bool detach_gates) {
  require(x.cols() == wk.rows() && xq.cols() == wq.rows() && wk.cols() == wq.cols(),
          "attention_head: shape mismatch");
  const int d_k = wk.cols();
  Tensor k = g.matmul(x, wk);                      // [N x d_k]
  Tensor q = g.matmul(xq, wq);                     // [N' x d_k]
  Tensor logits = g.scale(g.matmul(k, g.transpose(q)), 1.0 / std::sqrt(static_cast<double>(d_k)));
  Tensor p = g.softmax(logits, 0);                 // column j: gates over inputs i
  Tensor gates = detach_gates ? g.detach(p) : p;
  return g.matmul(g.transpose(gates), x);          // row j = sum_i x_i p_ij
}

ForwardTrace forward(const TransformerModel& model, const std::vector<int>& tokens,
                     DetachMode mode) {
  const ModelConfig& c = model.config;
  c.validate();
  const int n = static_cast<int>(tokens.size());
  require(n >= 1, "forward: empty token sequence");
  require(n <= c.max_seq_len, "forward: sequence longer than max_seq_len");

  ForwardTrace t;
  t.graph = std::make_unique<Graph>();
  t.mode = mode;
  t.tokens = tokens;
  Graph& g = *t.graph;

  t.param_leaves.reserve(model.params.size());
  for (const auto& p : model.params) {
    t.param_leaves.push_back(g.leaf(p.shape, p.values, true));
  }
  auto leaf = [&](const std::string& name) -> Tensor {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      if (model.params[i].name == name) return t.param_leaves[i];
    }
    throw std::invalid_argument("no parameter named '" + name + "'");
  };

  Tensor emb = g.embedding(leaf("embed.tokens"), tokens);
  Tensor pe = [&] {
    if (c.positional_encoding == PositionalEncoding::kLearned) {
      std::vector<int> pos(tokens.size());
      for (int i = 0; i < n; ++i) pos[i] = i;
      return g.embedding(leaf("embed.positions"), pos);
    }
    return g.constant({n, c.d_model}, sinusoidal_pe(n, c.d_model));
  }();
  Tensor x = g.add(emb, pe);
  t.x0 = x;

  const bool det_gates = detaches_gates(mode);
  const bool det_ln = detaches_ln_scale(mode);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(c.d_k));

  t.heads.resize(c.n_layers);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string lp = "layers." + std::to_string(l) + ".";
    Tensor attn_sum = x;  // residual folded into the head sum
    for (int h = 0; h < c.n_heads; ++h) {
      const std::string hp = lp + "heads." + std::to_string(h) + ".";
      HeadTrace ht;
      ht.x_tap = g.identity(x);   // mix + key paths
      ht.xq_tap = g.identity(x);  // query path
      Tensor k = g.matmul(ht.x_tap, leaf(hp + "w_k"));
      Tensor q = g.matmul(ht.xq_tap, leaf(hp + "w_q"));
      ht.q = g.scale(g.matmul(k, g.transpose(q)), inv_sqrt_dk);
      ht.p = g.softmax(ht.q, 0);
      Tensor gates = det_gates ? g.detach(ht.p) : ht.p;
      ht.mix = g.matmul(g.transpose(gates), ht.x_tap);
      Tensor head_out = g.matmul(g.matmul(ht.mix, leaf(hp + "w_v")), leaf(hp + "w_o"));
      attn_sum = g.add(attn_sum, head_out);
      t.heads[l].push_back(ht);
    }
    LnTrace ln1;
    ln1.input = attn_sum;
    ln1.core = g.layernorm_core(attn_sum, c.eps_ln, det_ln);
    t.lns.push_back(ln1);
    Tensor x1 = g.rowwise_affine(ln1.core, leaf(lp + "ln1.gamma"), leaf(lp + "ln1.beta"));

    Tensor h1 = g.add_rowvec(g.matmul(x1, leaf(lp + "ffn.w1")), leaf(lp + "ffn.b1"));
    Tensor a1 = (c.activation == Activation::kGelu) ? g.gelu(h1) : g.relu(h1);
    Tensor h2 = g.add_rowvec(g.matmul(a1, leaf(lp + "ffn.w2")), leaf(lp + "ffn.b2"));
    Tensor res2 = g.add(x1, h2);
    LnTrace ln2;
    ln2.input = res2;
    ln2.core = g.layernorm_core(res2, c.eps_ln, det_ln);
    t.lns.push_back(ln2);
    x = g.rowwise_affine(ln2.core, leaf(lp + "ln2.gamma"), leaf(lp + "ln2.beta"));
  }

  t.pooled = c.use_cls ? g.take_row(x, 0) : g.mean_axis0(x);
  t.logits = g.add_rowvec(g.matmul(t.pooled, leaf("classifier.weight")), leaf("classifier.bias"));
  return t;
}

std::vector<double> logits_of(const TransformerModel& model, const std::vector<int>& tokens) {
  return forward(model, tokens, DetachMode::kNone).logits.values();
}

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"d_model", c.d_model},
              {"n_heads", c.n_heads},
              {"d_k", c.d_k},
              {"n_layers", c.n_layers},
              {"d_ff", c.d_ff},
              {"max_seq_len", c.max_seq_len},
              {"n_classes", c.n_classes},
              {"eps_ln", c.eps_ln},
              {"positional_encoding",
               c.positional_encoding == PositionalEncoding::kLearned ? "learned" : "sinusoidal"},
              {"activation", c.activation == Activation::kGelu ? "gelu" : "relu"},
              {"use_cls", c.use_cls}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  const std::string path = "config.";
  c.vocab_size = get_int(j, path, "vocab_size");
  c.d_model = get_int(j, path, "d_model");
  c.n_heads = get_int(j, path, "n_heads");
  c.d_k = get_int(j, path, "d_k");
  c.n_layers = get_int(j, path, "n_layers");
  c.d_ff = get_int(j, path, "d_ff");
  c.max_seq_len = get_int(j, path, "max_seq_len");
  c.n_classes = get_int(j, path, "n_classes");
  c.eps_ln = get_double(j, path, "eps_ln");
  const std::string pe = get_string(j, path, "positional_encoding");
  if (pe == "sinusoidal") {
    c.positional_encoding = PositionalEncoding::kSinusoidal;
  } else if (pe == "learned") {
    c.positional_encoding = PositionalEncoding::kLearned;
  } else {
    format_error("config.positional_encoding", "must be 'sinusoidal' or 'learned'");
  }
  const std::string act = get_string(j, path, "activation");
  if (act == "relu") {
    c.activation = Activation::kRelu;
  } else if (act == "gelu") {
    c.activation = Activation::kGelu;
  } else {
    format_error("config.activation", "must be 'relu' or 'gelu'");
  }
  const json& cls = get_field(j, path, "use_cls");
  if (!cls.is_boolean()) format_error("config.use_cls", "is not a boolean");
  c.use_cls = cls.get<bool>();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  return c;
}

}  // namespace

void save_model(const TransformerModel& model, const std::string& path) {
  json j;
  j["format"] = "lrpx-checkpoint";
  j["version"] = 1;
  j["config"] = config_to_json(model.config);
  j["rng_seed"] = model.rng_seed;
  json params = json::array();
  for (const auto& p : model.params) {
    params.push_back(json{{"name", p.name}, {"shape", p.shape}, {"values", p.values}});
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump();
  out << "\n";
  if (!out.good()) throw std::runtime_error("write failed for '" + path + "'");
}

TransformerModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: not valid JSON (" + std::string(e.what()) + ")");
  }
  if (get_string(j, "", "format") != "lrpx-checkpoint") {
    format_error("format", "must be 'lrpx-checkpoint'");
  }
  if (get_int(j, "", "version") != 1) format_error("version", "must be 1");

  TransformerModel m;
  m.config = config_from_json(get_field(j, "", "config"));
  const json& seed = get_field(j, "", "rng_seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    format_error("rng_seed", "is not an integer");
  }
  m.rng_seed = seed.get<std::uint64_t>();

  const json& params = get_field(j, "", "params");
  if (!params.is_array()) format_error("params", "is not an array");
  std::vector<Param> skeleton = make_skeleton(m.config);
  if (params.size() != skeleton.size()) {
    format_error("params", "has " + std::to_string(params.size()) + " entries, expected " +
                               std::to_string(skeleton.size()));
  }
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const std::string fp = "params[" + std::to_string(i) + "].";
    const json& pj = params.at(i);
    if (get_string(pj, fp, "name") != skeleton[i].name) {
      format_error(fp + "name", "expected '" + skeleton[i].name + "'");
    }
    const json& shape = get_field(pj, fp, "shape");
    if (!shape.is_array() || shape.get<Shape>() != skeleton[i].shape) {
      format_error(fp + "shape", "does not match the config");
    }
    const json& values = get_field(pj, fp, "values");
    if (!values.is_array() || values.size() != skeleton[i].values.size()) {
      format_error(fp + "values", "wrong length");
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      const json& v = values.at(k);
      if (!v.is_number()) format_error(fp + "values", "entry " + std::to_string(k) + " is not a number");
      skeleton[i].values[k] = v.get<double>();
      if (!std::isfinite(skeleton[i].values[k])) {
        format_error(fp + "values", "entry " + std::to_string(k) + " is not finite");
      }
    }
  }
  m.params = std::move(skeleton);
  return m;
}

}  // namespace lrpx
