#include "lrpx/relevance.hpp"

#include <omp.h>

#include <cmath>
#include <stdexcept>

#include "lrpx/maxflow.hpp"
#include "lrpx/rng.hpp"

namespace lrpx {

namespace {

Tensor target_scalar(ForwardTrace& t, const ExplanationTarget& tg) {
  Graph& g = *t.graph;
  switch (tg.kind) {
    case ExplanationTarget::Kind::kLogit:
      return g.select(t.logits, tg.c);
    case ExplanationTarget::Kind::kLogitDiff:
      return g.sub(g.select(t.logits, tg.c), g.select(t.logits, tg.c_neg));
    case ExplanationTarget::Kind::kLogProb:
      return g.select(g.log_softmax(t.logits), tg.c);
  }
  throw std::invalid_argument("unknown explanation target");
}

// R(x_i) = x_i . df/dx_i over the token's embedding dimensions.
std::vector<double> token_relevances_from(const ForwardTrace& t) {
  const auto& x = t.x0.values();
  const auto& gx = t.x0.grad();
  const int n = t.x0.rows(), d = t.x0.cols();
  std::vector<double> rel(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) {
      const std::size_t k = static_cast<std::size_t>(i) * d + c;
      acc += x[k] * gx[k];
    }
    rel[i] = acc;
  }
  return rel;
}

// Row-stochastic head-mean attention: A[j][i] = mean_h p_ij of head h.
Mat head_mean_attention(const std::vector<HeadTrace>& heads) {
  const int n = heads.front().p.rows();
  Mat a(n, n);
  for (const auto& h : heads) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a.at(j, i) += h.p.at(i, j);
  }
  const double inv = 1.0 / static_cast<double>(heads.size());
  for (auto& v : a.v) v *= inv;
  return a;
}

Mat with_residual(const Mat& a, double residual_weight) {
  Mat out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) {
      out.at(i, j) = (1.0 - residual_weight) * a.at(i, j) + (i == j ? residual_weight : 0.0);
    }
    double row = 0.0;
    for (int j = 0; j < a.cols; ++j) row += out.at(i, j);
    if (row > 0.0) {
      for (int j = 0; j < a.cols; ++j) out.at(i, j) /= row;
    }
  }
  return out;
}

std::vector<Mat> rollout_stack(const ForwardTrace& t, double residual_weight) {
  std::vector<Mat> stack;
  stack.reserve(t.heads.size());
  for (const auto& layer : t.heads) {
    stack.push_back(with_residual(head_mean_attention(layer), residual_weight));
  }
  return stack;
}

std::vector<double> column_means(const Mat& m) {
  std::vector<double> out(m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out[j] += m.at(i, j);
  for (auto& v : out) v /= m.rows;
  return out;
}

std::vector<double> pooling_weights(const ModelConfig& c, int n) {
  std::vector<double> w(n, 0.0);
  if (c.use_cls) {
    w[0] = 1.0;
  } else {
    std::fill(w.begin(), w.end(), 1.0 / n);
  }
  return w;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kGi: return "gi";
    case Method::kLrpAh: return "lrp_ah";
    case Method::kLrpLn: return "lrp_ln";
    case Method::kLrpAhLn: return "lrp_ah_ln";
    case Method::kALast: return "a_last";
    case Method::kRollout: return "rollout";
    case Method::kAFlow: return "a_flow";
    case Method::kGae: return "gae";
    case Method::kRandom: return "random";
  }
  return "gi";
}

Method method_from_string(const std::string& s) {
  if (s == "gi") return Method::kGi;
  if (s == "lrp_ah") return Method::kLrpAh;
  if (s == "lrp_ln") return Method::kLrpLn;
  if (s == "lrp_ah_ln") return Method::kLrpAhLn;
  if (s == "a_last") return Method::kALast;
  if (s == "rollout") return Method::kRollout;
  if (s == "a_flow") return Method::kAFlow;
  if (s == "gae") return Method::kGae;
  if (s == "random") return Method::kRandom;
  throw std::invalid_argument("unknown method '" + s + "'");
}

DetachMode detach_mode_of(Method m) {
  switch (m) {
    case Method::kGi: return DetachMode::kNone;
    case Method::kLrpAh: return DetachMode::kAh;
    case Method::kLrpLn: return DetachMode::kLn;
    case Method::kLrpAhLn: return DetachMode::kAhLn;
    default: throw std::invalid_argument("method has no detach mode: " + to_string(m));
  }
}

ExplanationTarget ExplanationTarget::logit(int c) {
  ExplanationTarget t;
  t.kind = Kind::kLogit;
  t.c = c;
  return t;
}

ExplanationTarget ExplanationTarget::logit_diff(int c_pos, int c_neg) {
  ExplanationTarget t;
  t.kind = Kind::kLogitDiff;
  t.c = c_pos;
  t.c_neg = c_neg;
  return t;
}

ExplanationTarget ExplanationTarget::log_prob(int c) {
  ExplanationTarget t;
  t.kind = Kind::kLogProb;
  t.c = c;
  return t;
}

void ExplanationTarget::validate(int n_classes) const {
  if (c < 0 || c >= n_classes) throw std::invalid_argument("target class out of range");
  if (kind == Kind::kLogitDiff && (c_neg < 0 || c_neg >= n_classes)) {
    throw std::invalid_argument("target negative class out of range");
  }
}

std::string ExplanationTarget::describe() const {
  switch (kind) {
    case Kind::kLogit: return "logit(" + std::to_string(c) + ")";
    case Kind::kLogitDiff:
      return "logit_diff(" + std::to_string(c) + "," + std::to_string(c_neg) + ")";
    case Kind::kLogProb: return "log_prob(" + std::to_string(c) + ")";
  }
  return "logit(0)";
}

std::vector<double> lrp_linear_redistribute(const Mat& z, const std::vector<double>& out_relevance) {
  if (static_cast<int>(out_relevance.size()) != z.cols) {
    throw std::invalid_argument("lrp_linear_redistribute: relevance length != columns");
  }
  std::vector<double> in(z.rows, 0.0);
  for (int j = 0; j < z.cols; ++j) {
    double denom = 0.0;
    for (int i = 0; i < z.rows; ++i) denom += z.at(i, j);
    if (std::abs(denom) < 1e-9) continue;  // 0/0 = 0
    const double scale = out_relevance[j] / denom;
    for (int i = 0; i < z.rows; ++i) in[i] += z.at(i, j) * scale;
  }
  return in;
}

Mat rollout_product(const std::vector<Mat>& att, double residual_weight) {
  if (att.empty()) throw std::invalid_argument("rollout_product: no attention matrices");
  Mat r = Mat::eye(att.front().rows);
  for (const auto& a : att) {
    r = with_residual(a, residual_weight) * r;  // bottom to top
  }
  return r;
}

std::vector<double> attention_flow_relevance(const std::vector<Mat>& att,
                                             const std::vector<double>& source_weights) {
  if (att.empty()) throw std::invalid_argument("attention_flow_relevance: no matrices");
  const int n = att.front().rows;
  const int layers = static_cast<int>(att.size());
  if (static_cast<int>(source_weights.size()) != n) {
    throw std::invalid_argument("attention_flow_relevance: source weight length mismatch");
  }
  // Node layout: 0 = super source; 1 + l*n + j = position j at level l,
  // l = 0 (inputs) .. layers (top).
  auto node = [n](int level, int j) { return 1 + level * n + j; };
  std::vector<double> rel(n, 0.0);
  for (int target = 0; target < n; ++target) {
    FlowNetwork net(1 + (layers + 1) * n);
    for (int j = 0; j < n; ++j) {
      if (source_weights[j] > 0.0) net.add_edge(0, node(layers, j), source_weights[j]);
    }
    for (int l = layers; l >= 1; --l) {
      const Mat& a = att[l - 1];
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          if (a.at(j, i) > 0.0) net.add_edge(node(l, j), node(l - 1, i), a.at(j, i));
        }
    }
    rel[target] = net.max_flow(0, node(0, target));
  }
  return rel;
}

Explanation explain_gradient_x_input(const TransformerModel& model,
                                     const std::vector<int>& tokens,
                                     const ExplanationTarget& target, DetachMode mode) {
  target.validate(model.config.n_classes);
  const double t0 = omp_get_wtime();
  ForwardTrace t = forward(model, tokens, mode);
  Tensor f = target_scalar(t, target);
  t.graph->backward(f);
  Explanation e;
  e.token_relevances = token_relevances_from(t);
  e.output_score = f.scalar();
  e.wall_time_seconds = omp_get_wtime() - t0;
  e.target = target;
  switch (mode) {
    case DetachMode::kNone: e.method = Method::kGi; break;
    case DetachMode::kAh: e.method = Method::kLrpAh; break;
    case DetachMode::kLn: e.method = Method::kLrpLn; break;
    case DetachMode::kAhLn: e.method = Method::kLrpAhLn; break;
  }
  return e;
}

Explanation explain_attention_last(const TransformerModel& model, const std::vector<int>& tokens,
                                   const ExplanationTarget& target) {
  target.validate(model.config.n_classes);
  const double t0 = omp_get_wtime();
  ForwardTrace t = forward(model, tokens, DetachMode::kNone);
  const auto& last = t.heads.back();
  const int n = static_cast<int>(tokens.size());
  std::vector<double> rel(n, 0.0);
  for (const auto& h : last) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) rel[i] += h.p.at(i, j);
    }
  }
  for (auto& v : rel) v /= static_cast<double>(last.size()) * n;
  Explanation e;
  e.method = Method::kALast;
  e.target = target;
  e.token_relevances = std::move(rel);
  e.output_score = target_scalar(t, target).scalar();
  e.wall_time_seconds = omp_get_wtime() - t0;
  return e;
}

Explanation explain_rollout(const TransformerModel& model, const std::vector<int>& tokens,
                            const ExplanationTarget& target) {
  target.validate(model.config.n_classes);
  const double t0 = omp_get_wtime();
  ForwardTrace t = forward(model, tokens, DetachMode::kNone);
  Mat r = Mat::eye(static_cast<int>(tokens.size()));
  for (const auto& m : rollout_stack(t, 0.5)) r = m * r;
  Explanation e;
  e.method = Method::kRollout;
  e.target = target;
  if (model.config.use_cls) {
    e.token_relevances.assign(r.v.begin(), r.v.begin() + r.cols);  // row 0
  } else {
    e.token_relevances = column_means(r);
  }
  e.output_score = target_scalar(t, target).scalar();
  e.wall_time_seconds = omp_get_wtime() - t0;
  return e;
}

Explanation explain_attention_flow(const TransformerModel& model, const std::vector<int>& tokens,
                                   const ExplanationTarget& target, int length_cap) {
  target.validate(model.config.n_classes);
  const int n = static_cast<int>(tokens.size());
  if (n > length_cap) {
    throw std::runtime_error("a_flow: sequence length " + std::to_string(n) +
                             " exceeds the cap of " + std::to_string(length_cap) +
                             " (max-flow per token is expensive; raise the cap to force)");
  }
  const double t0 = omp_get_wtime();
  ForwardTrace t = forward(model, tokens, DetachMode::kNone);
  Explanation e;
  e.method = Method::kAFlow;
  e.target = target;
  e.token_relevances =
      attention_flow_relevance(rollout_stack(t, 0.5), pooling_weights(model.config, n));
  e.output_score = target_scalar(t, target).scalar();
  e.wall_time_seconds = omp_get_wtime() - t0;
  return e;
}

Explanation explain_gae(const TransformerModel& model, const std::vector<int>& tokens,
                        const ExplanationTarget& target) {
  target.validate(model.config.n_classes);
  const double t0 = omp_get_wtime();
  ForwardTrace t = forward(model, tokens, DetachMode::kNone);
  Tensor f = target_scalar(t, target);
  t.graph->backward(f);
  const int n = static_cast<int>(tokens.size());

  Mat r = Mat::eye(n);
  for (const auto& layer : t.heads) {
    // Head-mean of the clamped gate-gradient product, in row-stochastic
    // orientation: c[j][i] = mean_h (p_ij * df/dp_ij)+.
    Mat c(n, n);
    for (const auto& h : layer) {
      const auto& gp = h.p.grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double prod = h.p.at(i, j) * gp[static_cast<std::size_t>(i) * n + j];
          if (prod > 0.0) c.at(j, i) += prod;
        }
    }
    const double inv = 1.0 / static_cast<double>(layer.size());
    for (auto& v : c.v) v *= inv;
    Mat delta = c * r;
    for (std::size_t k = 0; k < r.v.size(); ++k) r.v[k] += delta.v[k];
  }
  for (int i = 0; i < n; ++i) r.at(i, i) -= 1.0;  // drop the identity seed

  Explanation e;
  e.method = Method::kGae;
  e.target = target;
  if (model.config.use_cls) {
    e.token_relevances.assign(r.v.begin(), r.v.begin() + r.cols);
  } else {
    e.token_relevances = column_means(r);
  }
  e.output_score = f.scalar();
  e.wall_time_seconds = omp_get_wtime() - t0;
  return e;
}

Explanation explain_random(const std::vector<int>& tokens, std::uint64_t seed) {
  const double t0 = omp_get_wtime();
  Rng rng(seed);
  Explanation e;
  e.method = Method::kRandom;
  e.has_seed = true;
  e.seed = seed;
  e.token_relevances.resize(tokens.size());
  for (auto& v : e.token_relevances) v = rng.uniform();
  e.wall_time_seconds = omp_get_wtime() - t0;
  return e;
}

Explanation explain(const TransformerModel& model, const std::vector<int>& tokens, Method method,
                    const ExplanationTarget& target, const ExplainOptions& opts) {
  switch (method) {
    case Method::kGi:
    case Method::kLrpAh:
    case Method::kLrpLn:
    case Method::kLrpAhLn:
      return explain_gradient_x_input(model, tokens, target, detach_mode_of(method));
    case Method::kALast:
      return explain_attention_last(model, tokens, target);
    case Method::kRollout:
      return explain_rollout(model, tokens, target);
    case Method::kAFlow:
      return explain_attention_flow(model, tokens, target, opts.flow_length_cap);
    case Method::kGae:
      return explain_gae(model, tokens, target);
    case Method::kRandom: {
      Explanation e = explain_random(tokens, opts.random_seed);
      e.target = target;
      return e;
    }
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace lrpx
