#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "lrpx/conservation.hpp"
#include "lrpx/evalharness.hpp"
#include "lrpx/relevance.hpp"
#include "lrpx/report.hpp"
#include "lrpx/rng.hpp"
#include "lrpx/traindata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lrpx;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// bad flag values / missing input files -> exit 2; everything else -> exit 1
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  std::tm tm_utc;
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct RunManifest {
  std::string command;
  json flags = json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> artifacts;  // file names inside the output dir
  std::string started = now_utc();
};

void write_manifest(const fs::path& out_dir, const RunManifest& m) {
  json j{{"format", "lrpx-manifest"},
         {"tool_version", kToolVersion},
         {"command", m.command},
         {"flags", m.flags},
         {"seeds", m.seeds},
         {"artifacts", m.artifacts},
         {"timestamps", {{"started", m.started}, {"finished", now_utc()}}}};
  write_text_file((out_dir / "manifest.json").string(), j.dump(2) + "\n");
}

fs::path resolve_out_dir(const std::string& flag_value) {
  std::string dir = flag_value;
  if (dir.empty()) {
    const char* env = std::getenv("LRPX_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw UsageError(what + " not found: '" + path + "'");
}

json read_json_file(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(what + " '" + path + "': not valid JSON (" + std::string(e.what()) +
                             ")");
  }
}

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    try {
      out.push_back(method_from_string(item.substr(a, b - a + 1)));
    } catch (const std::exception& e) {
      throw UsageError(std::string("--methods: ") + e.what());
    }
  }
  if (out.empty()) throw UsageError("--methods: no methods given");
  return out;
}

// "pred" (argmax logit), a class index, "diff:a,b", or "logprob:c"
ExplanationTarget parse_target(const std::string& s, const std::vector<double>& logits) {
  ExplanationTarget t;
  try {
    if (s == "pred") {
      int best = 0;
      for (int c = 1; c < (int)logits.size(); ++c)
        if (logits[c] > logits[best]) best = c;
      t = ExplanationTarget::logit(best);
    } else if (s.rfind("diff:", 0) == 0) {
      const auto comma = s.find(',', 5);
      if (comma == std::string::npos) throw std::invalid_argument("expected diff:a,b");
      t = ExplanationTarget::logit_diff(std::stoi(s.substr(5, comma - 5)),
                                        std::stoi(s.substr(comma + 1)));
    } else if (s.rfind("logprob:", 0) == 0) {
      t = ExplanationTarget::log_prob(std::stoi(s.substr(8)));
    } else {
      t = ExplanationTarget::logit(std::stoi(s));
    }
    t.validate((int)logits.size());
  } catch (const std::exception& e) {
    throw UsageError("--target '" + s + "': " + e.what());
  }
  return t;
}

std::vector<std::vector<int>> all_token_lists(const Dataset& data) {
  std::vector<std::vector<int>> out;
  out.reserve(data.examples.size());
  for (const auto& ex : data.examples) out.push_back(ex.tokens);
  return out;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string out, name = "dataset.jsonl";
  int n = 1000, seq_len = 10, vocab = 30;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenDataArgs& a) {
  const fs::path out_dir = resolve_out_dir(a.out);
  Dataset data = gen_keyword_sentiment(a.seed, a.n, a.seq_len, a.vocab);
  save_dataset(data, (out_dir / a.name).string());

  RunManifest m;
  m.command = "gen-data";
  m.flags = {{"out", out_dir.string()}, {"name", a.name},   {"n", a.n},
             {"seq_len", a.seq_len},    {"vocab", a.vocab}, {"seed", a.seed}};
  m.seeds = {a.seed};
  m.artifacts = {a.name, a.name + ".meta.json"};
  write_manifest(out_dir, m);
  std::printf("wrote %d examples to %s\n", (int)data.examples.size(),
              (out_dir / a.name).string().c_str());
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config, dataset, out;
  std::uint64_t seed = 0;
  bool clock = false;
};

ModelConfig model_config_from(const json& j, const Dataset& data) {
  ModelConfig c;
  try {
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.d_k = j.value("d_k", c.n_heads > 0 ? c.d_model / c.n_heads : 0);
    c.vocab_size = j.value("vocab_size", 0);
    c.n_classes = j.value("n_classes", 0);
    c.max_seq_len = j.value("max_seq_len", 0);
    c.eps_ln = j.value("eps_ln", 1e-6);
    c.use_cls = j.value("use_cls", false);
    const std::string pe = j.value("positional_encoding", std::string("sinusoidal"));
    if (pe == "sinusoidal") c.positional_encoding = PositionalEncoding::kSinusoidal;
    else if (pe == "learned") c.positional_encoding = PositionalEncoding::kLearned;
    else throw std::invalid_argument("positional_encoding must be sinusoidal or learned");
    const std::string act = j.value("activation", std::string("relu"));
    if (act == "relu") c.activation = Activation::kRelu;
    else if (act == "gelu") c.activation = Activation::kGelu;
    else throw std::invalid_argument("activation must be relu or gelu");
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config.model: ") + e.what());
  }
  // unset sizes come from the dataset
  if (c.vocab_size == 0) c.vocab_size = data.vocab.size();
  if (c.n_classes == 0) c.n_classes = data.n_classes;
  if (c.max_seq_len == 0) {
    for (const auto& ex : data.examples)
      c.max_seq_len = std::max(c.max_seq_len, (int)ex.tokens.size());
  }
  c.validate();
  return c;
}

TrainConfig train_config_from(const json& j, std::uint64_t seed) {
  TrainConfig t;
  t.lr = j.value("lr", t.lr);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.eps = j.value("eps", t.eps);
  t.seed = seed;
  t.validate();
  return t;
}

int run_train(const TrainArgs& a) {
  const fs::path out_dir = resolve_out_dir(a.out);
  const json cfg = read_json_file(a.config, "config");
  require_file(a.dataset, "dataset");
  Dataset data = load_dataset(a.dataset);

  if (!cfg.contains("model")) throw std::runtime_error("config: missing \"model\" section");
  ModelConfig mc = model_config_from(cfg.at("model"), data);
  TrainConfig tc = train_config_from(cfg.value("train", json::object()), a.seed);

  TransformerModel model = init_model(mc, a.seed);
  TrainResult result = train(model, data, tc);
  save_model(model, (out_dir / "checkpoint.json").string());

  const auto heldout = data.heldout_split();
  const auto eval_split = heldout.empty() ? data.train_split() : heldout;
  json epochs = json::array();
  for (const auto& em : result.trace)
    epochs.push_back({{"epoch", em.epoch},
                      {"train_loss", em.train_loss},
                      {"val_loss", em.val_loss},
                      {"val_accuracy", em.val_accuracy}});
  json metrics{{"best_epoch", result.best_epoch},
               {"epochs", epochs},
               {"heldout_size", heldout.size()},
               {"heldout_accuracy", accuracy(model, eval_split)}};
  write_text_file((out_dir / "metrics.json").string(), metrics.dump(2) + "\n");

  RunManifest m;
  m.command = "train";
  m.flags = {{"config", a.config},
             {"dataset", a.dataset},
             {"out", out_dir.string()},
             {"seed", a.seed},
             {"clock", a.clock}};
  m.seeds = {a.seed};
  m.artifacts = {"checkpoint.json", "metrics.json"};
  write_manifest(out_dir, m);
  std::printf("best epoch %d, heldout accuracy %.4f\n", result.best_epoch,
              metrics["heldout_accuracy"].get<double>());
  return 0;
}

// ----------------------------------------------------------------- explain

struct ExplainArgs {
  std::string model, input, vocab, out;
  std::string method = "lrp_ah_ln", target = "pred", format = "json";
  std::uint64_t seed = 0;
  bool clock = false;
};

int run_explain(const ExplainArgs& a) {
  const fs::path out_dir = resolve_out_dir(a.out);
  require_file(a.model, "model");
  TransformerModel model = load_model(a.model);

  bool have_vocab = !a.vocab.empty();
  Vocab vocab;
  if (have_vocab) {
    require_file(a.vocab, "vocab dataset");
    vocab = load_dataset(a.vocab).vocab;
  }

  const json ij = read_json_file(a.input, "input");
  if (!ij.contains("tokens") || !ij.at("tokens").is_array())
    throw std::runtime_error("input '" + a.input + "': expected a \"tokens\" array");
  std::vector<int> tokens;
  for (const auto& t : ij.at("tokens")) {
    if (t.is_number_integer()) {
      tokens.push_back(t.get<int>());
    } else if (t.is_string()) {
      if (!have_vocab) throw UsageError("string tokens in input need --vocab");
      tokens.push_back(vocab.id_of(t.get<std::string>()));
    } else {
      throw std::runtime_error("input '" + a.input + "': tokens must be ids or strings");
    }
  }

  Method method;
  try {
    method = method_from_string(a.method);
  } catch (const std::exception& e) {
    throw UsageError(std::string("--method: ") + e.what());
  }
  const ExplanationTarget target = parse_target(a.target, logits_of(model, tokens));

  ExplainOptions opts;
  opts.random_seed = a.seed;
  Explanation ex = explain(model, tokens, method, target, opts);
  if (!a.clock) ex.wall_time_seconds = 0.0;

  std::vector<std::string> labels(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    labels[i] = have_vocab && t >= 0 && t < vocab.size() ? vocab.id_to_token[t]
                                                         : "#" + std::to_string(t);
  }

  std::string artifact;
  if (a.format == "json") {
    artifact = "explanation.json";
    json j = explanation_to_json(ex, tokens, have_vocab ? &labels : nullptr);
    write_text_file((out_dir / artifact).string(), j.dump(2) + "\n");
  } else {
    artifact = "explanation.html";
    write_text_file((out_dir / artifact).string(), explanation_html(ex, labels));
  }

  RunManifest m;
  m.command = "explain";
  m.flags = {{"model", a.model},   {"input", a.input}, {"vocab", a.vocab},
             {"out", out_dir.string()}, {"method", a.method}, {"target", a.target},
             {"format", a.format}, {"seed", a.seed},   {"clock", a.clock}};
  m.seeds = {a.seed};
  m.artifacts = {artifact};
  write_manifest(out_dir, m);
  std::printf("wrote %s (score %.6g)\n", (out_dir / artifact).string().c_str(), ex.output_score);
  return 0;
}

// ------------------------------------------------------------ conservation

struct ConservationArgs {
  std::string model, dataset, out;
  std::string methods = "gi,lrp_ah,lrp_ln,lrp_ah_ln";
  std::uint64_t seed = 0;
  int probe_examples = 8;
};

int run_conservation(const ConservationArgs& a) {
  const fs::path out_dir = resolve_out_dir(a.out);
  require_file(a.model, "model");
  require_file(a.dataset, "dataset");
  TransformerModel model = load_model(a.model);
  Dataset data = load_dataset(a.dataset);
  const auto examples = all_token_lists(data);
  const auto methods = parse_methods(a.methods);

  RunManifest m;
  m.command = "conservation";
  m.flags = {{"model", a.model},         {"dataset", a.dataset},
             {"out", out_dir.string()},  {"methods", a.methods},
             {"seed", a.seed},           {"probe_examples", a.probe_examples}};
  m.seeds = {a.seed};

  ExplainOptions opts;
  opts.random_seed = a.seed;
  json summary_methods = json::array();
  for (Method method : methods) {
    ConservationReport report = check_global(model, examples, method, opts);
    const std::string name = to_string(method);
    write_text_file((out_dir / ("conservation_" + name + ".csv")).string(),
                    conservation_csv(report));
    write_text_file((out_dir / ("conservation_" + name + ".svg")).string(),
                    scatter_svg(report, name + " conservation"));
    m.artifacts.push_back("conservation_" + name + ".csv");
    m.artifacts.push_back("conservation_" + name + ".svg");
    summary_methods.push_back({{"method", name},
                               {"n_examples", report.pairs.size()},
                               {"mean_relative_deviation", report.mean_relative_deviation},
                               {"pearson", report.pearson}});
  }

  // residual summaries on a handful of examples: attention-head identity under
  // plain gradients and the per-LayerNorm relevance ratio vs its prediction
  const int n_probe = std::min<int>(a.probe_examples, (int)examples.size());
  json head_rows = json::array();
  double head_max = 0.0;
  for (int layer = 0; layer < model.config.n_layers; ++layer) {
    for (int head = 0; head < model.config.n_heads; ++head) {
      double worst = 0.0, sum = 0.0;
      for (int ei = 0; ei < n_probe; ++ei) {
        HeadConservationCheck chk = check_attention_head(model, examples[ei], layer, head);
        worst = std::max(worst, chk.residual);
        sum += chk.residual;
      }
      head_rows.push_back({{"layer", layer},
                           {"head", head},
                           {"max_residual", worst},
                           {"mean_residual", n_probe > 0 ? sum / n_probe : 0.0}});
      head_max = std::max(head_max, worst);
    }
  }

  json ln_rows = json::array();
  const int n_lns = 2 * model.config.n_layers;
  for (int ln = 0; ln < n_lns; ++ln) {
    double worst = 0.0;
    int n_groups = 0, n_degenerate = 0;
    for (int ei = 0; ei < n_probe; ++ei) {
      for (const LnGroupCheck& chk : check_layernorm(model, examples[ei], ln)) {
        ++n_groups;
        if (chk.degenerate) {
          ++n_degenerate;
          continue;
        }
        worst = std::max(worst, std::abs(chk.measured - chk.predicted) /
                                    std::max(std::abs(chk.predicted), 1e-12));
      }
    }
    ln_rows.push_back({{"ln_index", ln},
                       {"max_rel_error", worst},
                       {"n_groups", n_groups},
                       {"n_degenerate", n_degenerate}});
  }

  json summary{{"methods", summary_methods},
               {"attention_heads",
                {{"n_examples", n_probe}, {"max_residual", head_max}, {"rows", head_rows}}},
               {"layernorms", {{"n_examples", n_probe}, {"rows", ln_rows}}}};
  write_text_file((out_dir / "conservation_summary.json").string(), summary.dump(2) + "\n");
  m.artifacts.push_back("conservation_summary.json");
  write_manifest(out_dir, m);
  std::printf("checked %d methods over %d examples\n", (int)methods.size(),
              (int)examples.size());
  return 0;
}

// --------------------------------------------------------------- benchmark

struct BenchmarkArgs {
  std::string model, dataset, out;
  std::string methods = "gi,lrp_ah,lrp_ln,lrp_ah_ln,a_last,rollout,a_flow,gae,random";
  std::uint64_t seed = 0;
  int flow_cap = 32;
  bool vector_mse = false;
  bool clock = false;
};

int run_benchmark(const BenchmarkArgs& a) {
  const fs::path out_dir = resolve_out_dir(a.out);
  require_file(a.model, "model");
  require_file(a.dataset, "dataset");
  TransformerModel model = load_model(a.model);
  Dataset data = load_dataset(a.dataset);
  const auto examples = all_token_lists(data);
  const auto methods = parse_methods(a.methods);

  BenchmarkOptions opts;
  opts.eval.unk_id = data.vocab.unk_id;
  opts.eval.vector_mse = a.vector_mse;
  opts.flow_length_cap = a.flow_cap;
  opts.dataset_id = fs::path(a.dataset).filename().string();

  BenchmarkTable table = lrpx::run_benchmark(model, examples, methods, a.seed, opts);
  if (!a.clock)
    for (auto& row : table.rows) row.mean_time_s = 0.0;

  RunManifest m;
  m.command = "benchmark";
  m.flags = {{"model", a.model},   {"dataset", a.dataset},   {"out", out_dir.string()},
             {"methods", a.methods}, {"seed", a.seed},       {"flow_cap", a.flow_cap},
             {"vector_mse", a.vector_mse}, {"clock", a.clock}};
  m.seeds = {a.seed};

  write_text_file((out_dir / "benchmark.csv").string(), benchmark_csv(table));
  write_text_file((out_dir / "benchmark.json").string(), benchmark_to_json(table).dump(2) + "\n");
  m.artifacts = {"benchmark.csv", "benchmark.json"};

  // per-method curve renderings, same seed derivation per example as the table
  for (const BenchmarkRow& row : table.rows) {
    if (!row.ok) continue;
    std::vector<PerturbationCurve> act, prune;
    for (int ei = 0; ei < (int)examples.size(); ++ei) {
      const auto& tokens = examples[ei];
      const auto logits = logits_of(model, tokens);
      int best = 0;
      for (int c = 1; c < (int)logits.size(); ++c)
        if (logits[c] > logits[best]) best = c;
      ExplainOptions eo;
      eo.random_seed = Rng::derive(a.seed, (std::uint64_t)ei);
      eo.flow_length_cap = a.flow_cap;
      Explanation ex = explain(model, tokens, row.method, ExplanationTarget::logit(best), eo);
      PerturbationCurve ac = activation_curve(model, tokens, ex, opts.eval);
      PerturbationCurve pc = pruning_curve(model, tokens, ex, opts.eval);
      ac.example_id = ei;
      pc.example_id = ei;
      act.push_back(std::move(ac));
      prune.push_back(std::move(pc));
    }
    const std::string name = to_string(row.method);
    write_text_file((out_dir / ("curves_" + name + "_activation.svg")).string(),
                    curves_svg(act, name + " activation"));
    write_text_file((out_dir / ("curves_" + name + "_pruning.svg")).string(),
                    curves_svg(prune, name + " pruning"));
    m.artifacts.push_back("curves_" + name + "_activation.svg");
    m.artifacts.push_back("curves_" + name + "_pruning.svg");
  }
  write_manifest(out_dir, m);

  for (const auto& row : table.rows) {
    if (row.ok)
      std::printf("%-10s auac %.4f  aumse %.6g  time %.6gs\n", to_string(row.method).c_str(),
                  row.mean_auac, row.mean_aumse, row.mean_time_s);
    else
      std::printf("%-10s skipped: %s\n", to_string(row.method).c_str(), row.note.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conservative relevance propagation for transformer classifiers"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic keyword-sentiment dataset");
  gen->add_option("--out", gen_args.out, "output directory (default $LRPX_OUT_DIR or .)");
  gen->add_option("--name", gen_args.name, "dataset file name")->capture_default_str();
  gen->add_option("--n", gen_args.n, "number of examples")->capture_default_str();
  gen->add_option("--seq-len", gen_args.seq_len, "tokens per example")->capture_default_str();
  gen->add_option("--vocab", gen_args.vocab, "vocabulary size")->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "generator seed")->capture_default_str();

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "train a classifier on a JSONL dataset");
  tr->add_option("--config", train_args.config, "JSON config with model/train sections")
      ->required();
  tr->add_option("--dataset", train_args.dataset, "JSONL dataset path")->required();
  tr->add_option("--out", train_args.out, "output directory (default $LRPX_OUT_DIR or .)");
  tr->add_option("--seed", train_args.seed, "init + training seed")->capture_default_str();
  tr->add_flag("--clock", train_args.clock, "record real wall times in outputs");

  ExplainArgs ex_args;
  auto* ex = app.add_subcommand("explain", "explain one prediction");
  ex->add_option("--model", ex_args.model, "checkpoint path")->required();
  ex->add_option("--input", ex_args.input, "JSON file with a \"tokens\" array")->required();
  ex->add_option("--method", ex_args.method, "relevance method")->capture_default_str();
  ex->add_option("--target", ex_args.target, "pred, class index, diff:a,b, or logprob:c")
      ->capture_default_str();
  ex->add_option("--format", ex_args.format, "output format")
      ->check(CLI::IsMember({"json", "html"}))
      ->capture_default_str();
  ex->add_option("--vocab", ex_args.vocab, "dataset path whose vocabulary labels the tokens");
  ex->add_option("--out", ex_args.out, "output directory (default $LRPX_OUT_DIR or .)");
  ex->add_option("--seed", ex_args.seed, "seed for the random baseline")->capture_default_str();
  ex->add_flag("--clock", ex_args.clock, "record real wall times in outputs");

  ConservationArgs cons_args;
  auto* cons = app.add_subcommand("conservation", "conservation scatter plots and residuals");
  cons->add_option("--model", cons_args.model, "checkpoint path")->required();
  cons->add_option("--dataset", cons_args.dataset, "JSONL dataset path")->required();
  cons->add_option("--methods", cons_args.methods, "comma-separated methods")
      ->capture_default_str();
  cons->add_option("--out", cons_args.out, "output directory (default $LRPX_OUT_DIR or .)");
  cons->add_option("--seed", cons_args.seed, "seed for the random baseline")
      ->capture_default_str();
  cons->add_option("--probe-examples", cons_args.probe_examples,
                   "examples used for per-component residual summaries")
      ->capture_default_str();

  BenchmarkArgs bench_args;
  auto* bench = app.add_subcommand("benchmark", "faithfulness benchmark table and curves");
  bench->add_option("--model", bench_args.model, "checkpoint path")->required();
  bench->add_option("--dataset", bench_args.dataset, "JSONL dataset path")->required();
  bench->add_option("--methods", bench_args.methods, "comma-separated methods")
      ->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "seed for the random baseline")
      ->capture_default_str();
  bench->add_option("--out", bench_args.out, "output directory (default $LRPX_OUT_DIR or .)");
  bench->add_option("--flow-cap", bench_args.flow_cap, "max sequence length for a_flow")
      ->capture_default_str();
  bench->add_flag("--vector-mse", bench_args.vector_mse,
                  "pruning metric over the whole logit vector");
  bench->add_flag("--clock", bench_args.clock, "record real wall times in outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (tr->parsed()) return run_train(train_args);
    if (ex->parsed()) return run_explain(ex_args);
    if (cons->parsed()) return run_conservation(cons_args);
    if (bench->parsed()) return run_benchmark(bench_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
