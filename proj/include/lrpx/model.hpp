#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lrpx/tensor.hpp"

namespace lrpx {

enum class PositionalEncoding { kSinusoidal, kLearned };
enum class Activation { kRelu, kGelu };

// Which backward paths are frozen. Values are identical in every mode;
// detaching changes gradients only.
enum class DetachMode { kNone, kAh, kLn, kAhLn };

bool detaches_gates(DetachMode m);
bool detaches_ln_scale(DetachMode m);
std::string to_string(DetachMode m);
DetachMode detach_mode_from_string(const std::string& s);

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 0;
  int n_heads = 0;
  int d_k = 0;  // per-head key dim; d_model = n_heads * d_k
  int n_layers = 0;
  int d_ff = 0;
  int max_seq_len = 0;
  int n_classes = 0;
  double eps_ln = 1e-6;
  PositionalEncoding positional_encoding = PositionalEncoding::kSinusoidal;
  Activation activation = Activation::kRelu;
  bool use_cls = false;  // classify from token 0 instead of mean-pooling

  void validate() const;  // throws std::invalid_argument naming the field
};

struct Param {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct TransformerModel {
  ModelConfig config;
  std::uint64_t rng_seed = 0;
  std::vector<Param> params;  // fixed, documented order

  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;
  void zero_biases();  // biases and LayerNorm betas; gammas stay
};

// Per-head tensors recorded during forward for conservation checks and the
// attention baselines. x_tap carries the mix+key paths, xq_tap the query
// path; mix is y_j = sum_i x_i p_ij before the value projection.
struct HeadTrace {
  Tensor x_tap;
  Tensor xq_tap;
  Tensor q;    // [N x N] pre-softmax logits, q_ij = k_i . q_j / sqrt(d_k)
  Tensor p;    // [N x N] column-stochastic gates (softmax over i)
  Tensor mix;  // [N x d_model]
};

struct LnTrace {
  Tensor input;  // normalization-core input (post-residual sum)
  Tensor core;   // core output before the affine gamma/beta
};

struct ForwardTrace {
  std::unique_ptr<Graph> graph;
  DetachMode mode = DetachMode::kNone;
  std::vector<int> tokens;
  Tensor x0;  // positionally encoded embeddings [N x d_model]
  std::vector<std::vector<HeadTrace>> heads;  // [layer][head]
  std::vector<LnTrace> lns;                   // layer-major: l0.ln1, l0.ln2, l1.ln1, ...
  Tensor pooled;
  Tensor logits;                    // [1 x n_classes]
  std::vector<Tensor> param_leaves;  // aligned with model.params
};

// Standalone attention head on a caller-owned graph: Y row j = sum_i x_i p_ij
// with p = softmax over i of (X Wk)(Xq Wq)^T / sqrt(d_k). Self-attention
// passes xq = x.
Tensor attention_head(Graph& g, Tensor x, Tensor xq, Tensor wk, Tensor wq, bool detach_gates);

TransformerModel init_model(const ModelConfig& config, std::uint64_t seed);
ForwardTrace forward(const TransformerModel& model, const std::vector<int>& tokens,
                     DetachMode mode);
std::vector<double> logits_of(const TransformerModel& model, const std::vector<int>& tokens);

void save_model(const TransformerModel& model, const std::string& path);
TransformerModel load_model(const std::string& path);  // std::runtime_error on bad files

}  // namespace lrpx
