#include "lrpx/traindata.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "lrpx/rng.hpp"

namespace lrpx {

using nlohmann::json;

namespace {

int argmax_class(const std::vector<double>& logits) {
  int best = 0;
  for (int c = 1; c < (int)logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

bool skip_weight_decay(const std::string& name) {
  auto ends_with = [&name](const char* suf) {
    const std::string s(suf);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends_with(".b1") || ends_with(".b2") || ends_with(".beta") ||
         name == "classifier.bias" || name.find("gamma") != std::string::npos;
}

}  // namespace

std::vector<const DatasetExample*> Dataset::train_split() const {
  std::vector<const DatasetExample*> out;
  for (int i = 0; i < train_count && i < (int)examples.size(); ++i) out.push_back(&examples[i]);
  return out;
}

std::vector<const DatasetExample*> Dataset::heldout_split() const {
  std::vector<const DatasetExample*> out;
  for (int i = train_count; i < (int)examples.size(); ++i) out.push_back(&examples[i]);
  return out;
}

Dataset gen_keyword_sentiment(std::uint64_t seed, int n_examples, int seq_len, int vocab_size) {
  if (n_examples < 1) throw std::invalid_argument("gen_keyword_sentiment: n_examples < 1");
  if (seq_len < 1) throw std::invalid_argument("gen_keyword_sentiment: seq_len < 1");
  if (vocab_size < 8) throw std::invalid_argument("gen_keyword_sentiment: vocab_size < 8");

  const int per_polarity = std::max(2, vocab_size / 10);
  const int pos_base = 1;                       // ids [1, 1+P)
  const int neg_base = 1 + per_polarity;        // ids [1+P, 1+2P)
  const int filler_base = 1 + 2 * per_polarity; // the rest
  const int n_filler = vocab_size - filler_base;

  Dataset ds;
  ds.generator = "keyword_sentiment";
  ds.seed = seed;
  ds.n_classes = 2;
  ds.vocab.add("[UNK]");
  for (int i = 0; i < per_polarity; ++i) ds.vocab.add("pos" + std::to_string(i));
  for (int i = 0; i < per_polarity; ++i) ds.vocab.add("neg" + std::to_string(i));
  for (int i = 0; i < n_filler; ++i) ds.vocab.add("w" + std::to_string(i));

  ds.examples.resize(n_examples);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_examples; ++i) {
    Rng rng(Rng::derive(seed, (std::uint64_t)i));
    DatasetExample& ex = ds.examples[i];
    ex.label = rng.uniform_int(2);
    const int n_kw = 1 + rng.uniform_int(std::min(3, seq_len));
    const int n_major = n_kw / 2 + 1;

    std::vector<int> slots(seq_len);
    for (int s = 0; s < seq_len; ++s) slots[s] = s;
    for (int s = 0; s < n_kw; ++s) std::swap(slots[s], slots[s + rng.uniform_int(seq_len - s)]);

    ex.tokens.assign(seq_len, 0);
    const int major_base = ex.label == 1 ? pos_base : neg_base;
    const int minor_base = ex.label == 1 ? neg_base : pos_base;
    for (int s = 0; s < n_kw; ++s) {
      const int base = s < n_major ? major_base : minor_base;
      ex.tokens[slots[s]] = base + rng.uniform_int(per_polarity);
    }
    // An occasional UNK filler keeps the unknown token in-distribution, so
    // perturbation analyses that blank tokens with it stay meaningful.
    for (int s = n_kw; s < seq_len; ++s)
      ex.tokens[slots[s]] = rng.uniform_int(8) == 0 ? 0 : filler_base + rng.uniform_int(n_filler);

    ex.keyword_positions.assign(slots.begin(), slots.begin() + n_major);
    std::sort(ex.keyword_positions.begin(), ex.keyword_positions.end());
  }

  ds.train_count = std::max(1, n_examples * 4 / 5);
  return ds;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("TrainConfig: eps must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
}

namespace {

double heldout_loss_and_accuracy(const TransformerModel& model,
                                 const std::vector<const DatasetExample*>& split,
                                 double* accuracy_out) {
  double loss = 0.0;
  int correct = 0;
  for (const auto* ex : split) {
    const auto logits = logits_of(model, ex->tokens);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    loss += -(logits[ex->label] - mx - std::log(z));
    if (argmax_class(logits) == ex->label) ++correct;
  }
  if (accuracy_out) *accuracy_out = (double)correct / (double)split.size();
  return loss / (double)split.size();
}

}  // namespace

TrainResult train(TransformerModel& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const auto train_split = data.train_split();
  const auto heldout = data.heldout_split();
  if (train_split.empty()) throw std::invalid_argument("train: empty training split");
  for (const auto* ex : train_split) {
    if (ex->label < 0 || ex->label >= model.config.n_classes)
      throw std::invalid_argument("train: label outside the model's class range");
    for (int t : ex->tokens)
      if (t < 0 || t >= model.config.vocab_size)
        throw std::invalid_argument("train: token id outside the model vocabulary");
  }

  const int n_params = (int)model.params.size();
  std::vector<std::vector<double>> m(n_params), v(n_params), accum(n_params);
  for (int p = 0; p < n_params; ++p) {
    m[p].assign(model.params[p].values.size(), 0.0);
    v[p].assign(model.params[p].values.size(), 0.0);
    accum[p].assign(model.params[p].values.size(), 0.0);
  }

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Param> best_params;
  int stale = 0;
  long long step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<int> order((std::size_t)train_split.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    Rng shuffle_rng(Rng::derive(cfg.seed, (std::uint64_t)epoch));
    for (int i = (int)order.size() - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += (std::size_t)cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + (std::size_t)cfg.batch_size);
      const int batch_n = (int)(stop - start);
      for (int p = 0; p < n_params; ++p) std::fill(accum[p].begin(), accum[p].end(), 0.0);

      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < stop; ++bi) {
        const DatasetExample& ex = *train_split[order[bi]];
        auto trace = forward(model, ex.tokens, DetachMode::kNone);
        Graph& g = *trace.graph;
        Tensor loss = g.scale(g.select(g.log_softmax(trace.logits), ex.label), -1.0);
        g.backward(loss);
        batch_loss += loss.scalar();
        for (int p = 0; p < n_params; ++p) {
          const auto& grad = trace.param_leaves[p].grad();
          for (std::size_t k = 0; k < grad.size(); ++k) accum[p][k] += grad[k];
        }
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(start / (std::size_t)cfg.batch_size));
      epoch_loss += batch_loss;

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, (double)step);
      const double bc2 = 1.0 - std::pow(cfg.beta2, (double)step);
      for (int p = 0; p < n_params; ++p) {
        Param& prm = model.params[p];
        const bool decay = !skip_weight_decay(prm.name);
        for (std::size_t k = 0; k < prm.values.size(); ++k) {
          const double g = accum[p][k] / batch_n;
          m[p][k] = cfg.beta1 * m[p][k] + (1.0 - cfg.beta1) * g;
          v[p][k] = cfg.beta2 * v[p][k] + (1.0 - cfg.beta2) * g * g;
          const double mh = m[p][k] / bc1;
          const double vh = v[p][k] / bc2;
          double upd = mh / (std::sqrt(vh) + cfg.eps);
          if (decay) upd += cfg.weight_decay * prm.values[k];
          prm.values[k] -= cfg.lr * upd;
        }
      }
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = epoch_loss / (double)train_split.size();
    if (!heldout.empty()) {
      em.val_loss = heldout_loss_and_accuracy(model, heldout, &em.val_accuracy);
    } else {
      em.val_loss = heldout_loss_and_accuracy(model, train_split, &em.val_accuracy);
    }
    result.trace.push_back(em);

    if (em.val_loss < best_val - 1e-12) {
      best_val = em.val_loss;
      best_params = model.params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale > cfg.patience) {
      break;
    }
  }

  if (result.best_epoch >= 0) model.params = best_params;
  return result;
}

double accuracy(const TransformerModel& model,
                const std::vector<const DatasetExample*>& examples) {
  if (examples.empty()) throw std::invalid_argument("accuracy: empty example set");
  int correct = 0;
  for (const auto* ex : examples)
    if (argmax_class(logits_of(model, ex->tokens)) == ex->label) ++correct;
  return (double)correct / (double)examples.size();
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& ex : data.examples) {
    json j;
    j["tokens"] = ex.tokens;
    j["label"] = ex.label;
    if (!ex.keyword_positions.empty()) j["keywords"] = ex.keyword_positions;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");

  json meta;
  meta["generator"] = data.generator;
  meta["seed"] = data.seed;
  meta["n_classes"] = data.n_classes;
  meta["train_count"] = data.train_count;
  meta["vocab"] = data.vocab.id_to_token;
  std::ofstream mout(path + ".meta.json");
  if (!mout) throw std::runtime_error("cannot write '" + path + ".meta.json'");
  mout << meta.dump(2) << "\n";
}

namespace {

[[noreturn]] void line_error(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error("dataset '" + path + "': line " + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");

  Dataset ds;
  bool have_meta = false;
  {
    std::ifstream min(path + ".meta.json");
    if (min) {
      json meta;
      try {
        min >> meta;
      } catch (const json::parse_error& e) {
        throw std::runtime_error("dataset '" + path + "': bad meta file: " + e.what());
      }
      ds.generator = meta.value("generator", std::string());
      ds.seed = meta.value("seed", (std::uint64_t)0);
      ds.n_classes = meta.value("n_classes", 2);
      ds.train_count = meta.value("train_count", 0);
      if (meta.contains("vocab")) {
        for (const auto& t : meta.at("vocab")) ds.vocab.add(t.get<std::string>());
      }
      have_meta = true;
    }
  }
  if (ds.vocab.size() == 0) ds.vocab.add("[UNK]");

  std::string line;
  int line_no = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      line_error(path, line_no, "not valid JSON");
    }
    if (!j.is_object() || !j.contains("tokens") || !j.contains("label"))
      line_error(path, line_no, "expected an object with 'tokens' and 'label'");
    if (!j.at("tokens").is_array()) line_error(path, line_no, "'tokens' is not an array");
    if (!j.at("label").is_number_integer()) line_error(path, line_no, "'label' is not an integer");

    DatasetExample ex;
    ex.label = j.at("label").get<int>();
    if (ex.label < 0) line_error(path, line_no, "negative label");
    max_label = std::max(max_label, ex.label);
    for (const auto& t : j.at("tokens")) {
      if (t.is_number_integer()) {
        const int id = t.get<int>();
        if (id < 0) line_error(path, line_no, "negative token id");
        if (have_meta && id >= ds.vocab.size())
          line_error(path, line_no, "token id outside the vocabulary");
        ex.tokens.push_back(id);
      } else if (t.is_string()) {
        ex.tokens.push_back(ds.vocab.id_of(t.get<std::string>()));
      } else {
        line_error(path, line_no, "token entries must be ids or strings");
      }
    }
    if (j.contains("keywords")) {
      if (!j.at("keywords").is_array()) line_error(path, line_no, "'keywords' is not an array");
      for (const auto& k : j.at("keywords")) {
        if (!k.is_number_integer()) line_error(path, line_no, "keyword positions must be integers");
        const int posn = k.get<int>();
        if (posn < 0 || posn >= (int)ex.tokens.size())
          line_error(path, line_no, "keyword position out of range");
        ex.keyword_positions.push_back(posn);
      }
    }
    ds.examples.push_back(std::move(ex));
  }

  if (!have_meta) {
    ds.n_classes = max_label + 1;
    ds.train_count = std::max(1, (int)ds.examples.size() * 4 / 5);
  }
  if (ds.n_classes <= max_label)
    throw std::runtime_error("dataset '" + path + "': label exceeds declared n_classes");
  return ds;
}

}  // namespace lrpx
