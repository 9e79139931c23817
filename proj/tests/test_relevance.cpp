#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <tuple>
#include <vector>

#include "lrpx/maxflow.hpp"
#include "lrpx/relevance.hpp"
#include "oracles.hpp"

using namespace lrpx;

namespace {

ModelConfig small_config(int vocab = 11, int d_model = 8, int heads = 2, int layers = 2) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d_model;
  c.n_heads = heads;
  c.d_k = d_model / heads;
  c.n_layers = layers;
  c.d_ff = 2 * d_model;
  c.max_seq_len = 16;
  c.n_classes = 2;
  return c;
}

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace

TEST_CASE("redistribute: attention hand example") {
  // Frozen gates (0.5, 0.5) on scalar tokens (2, 4); R(y) = 3 -> R(x) = (1, 2).
  Mat z(2, 1);
  z.at(0, 0) = 2.0 * 0.5;
  z.at(1, 0) = 4.0 * 0.5;
  const auto r = lrp_linear_redistribute(z, {3.0});
  CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("redistribute: centering-map hand example conserves") {
  // N=2, x=(3,1), z_ij = x_i (delta_ij - 1/2): magnitudes 1.5 and 0.5.
  const std::vector<double> x{3.0, 1.0};
  Mat z(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) z.at(i, j) = x[i] * ((i == j ? 1.0 : 0.0) - 0.5);
  CHECK(std::abs(z.at(0, 0)) == doctest::Approx(1.5));
  CHECK(std::abs(z.at(0, 1)) == doctest::Approx(1.5));
  CHECK(std::abs(z.at(1, 0)) == doctest::Approx(0.5));
  CHECK(std::abs(z.at(1, 1)) == doctest::Approx(0.5));
  const std::vector<double> out_rel{0.7, -2.3};
  const auto in_rel = lrp_linear_redistribute(z, out_rel);
  CHECK(oracles::sum(in_rel) == doctest::Approx(oracles::sum(out_rel)).epsilon(1e-12));
}

TEST_CASE("redistribute: zero column and identity contributions") {
  Mat z(3, 2);
  z.at(0, 0) = 1.0;
  z.at(1, 0) = 2.0;
  z.at(2, 0) = -3.0;  // column sums to 0 -> contributes nothing
  z.at(0, 1) = 4.0;
  const auto r = lrp_linear_redistribute(z, {100.0, 8.0});
  CHECK(r[0] == doctest::Approx(8.0));
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 0.0);

  Mat d(3, 3);
  d.at(0, 0) = 2.0;
  d.at(1, 1) = -0.5;
  d.at(2, 2) = 7.0;
  const std::vector<double> out{1.0, 2.0, 3.0};
  CHECK(lrp_linear_redistribute(d, out) == out);
}

TEST_CASE("single-token zero-bias model: relevance equals the output exactly") {
  Rng seeds(41);
  for (int trial = 0; trial < 5; ++trial) {
    TransformerModel m = init_model(small_config(), seeds.next_u64());  // biases zero at init
    const std::vector<int> toks{3};
    const auto lg = logits_of(m, toks);
    const int cls = argmax(lg);
    Explanation e = explain_gradient_x_input(m, toks, ExplanationTarget::logit(cls),
                                             DetachMode::kAhLn);
    REQUIRE(e.token_relevances.size() == 1);
    CHECK(std::abs(e.token_relevances[0] - e.output_score) <=
          1e-12 * std::max(1.0, std::abs(e.output_score)));
  }
}

TEST_CASE("zero-bias conservation: AH+LN tight, GI loose") {
  Rng seeds(42);
  double worst_lrp = 0.0, worst_gi = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    TransformerModel m = init_model(small_config(), seeds.next_u64());
    const std::vector<int> toks{1, 7, 3, 9, 5};
    const int cls = argmax(logits_of(m, toks));
    const auto tgt = ExplanationTarget::logit(cls);

    Explanation lrp = explain_gradient_x_input(m, toks, tgt, DetachMode::kAhLn);
    const double dev_lrp = std::abs(oracles::sum(lrp.token_relevances) - lrp.output_score) /
                           std::max(std::abs(lrp.output_score), 1e-12);
    worst_lrp = std::max(worst_lrp, dev_lrp);

    Explanation gi = explain_gradient_x_input(m, toks, tgt, DetachMode::kNone);
    worst_gi = std::max(worst_gi, std::abs(oracles::sum(gi.token_relevances) - gi.output_score) /
                                      std::max(std::abs(gi.output_score), 1e-12));
  }
  INFO("worst AH+LN deviation " << worst_lrp << ", worst GI deviation " << worst_gi);
  CHECK(worst_lrp <= 1e-4);
  CHECK(worst_gi > worst_lrp);
}

TEST_CASE("detach-based AH relevance equals the explicit redistribution oracle") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4, d = 3, dk = 2;
    const auto x0 = oracles::random_vec(rng, n * d, -1.5, 1.5);
    const auto wk0 = oracles::random_vec(rng, d * dk);
    const auto wq0 = oracles::random_vec(rng, d * dk);
    const auto w0 = oracles::random_vec(rng, n * d);

    Graph g;
    Tensor x = g.leaf({n, d}, x0, true);
    Tensor y = attention_head(g, x, x, g.constant({d, dk}, wk0), g.constant({d, dk}, wq0), true);
    g.backward(g.sum(g.mul(y, g.constant({n, d}, w0))));

    // Gates from an independent plain forward.
    Graph gp;
    Tensor xp = gp.leaf({n, d}, x0, false);
    Tensor k = gp.matmul(xp, gp.constant({d, dk}, wk0));
    Tensor q = gp.matmul(xp, gp.constant({d, dk}, wq0));
    Tensor p = gp.softmax(gp.scale(gp.matmul(k, gp.transpose(q)), 1.0 / std::sqrt(2.0)), 0);

    std::vector<double> oracle(n, 0.0);
    for (int c = 0; c < d; ++c) {
      Mat z(n, n);
      std::vector<double> out_rel(n);
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) z.at(i, j) = x0[static_cast<std::size_t>(i) * d + c] * p.at(i, j);
        out_rel[j] = y.at(j, c) * w0[static_cast<std::size_t>(j) * d + c];
      }
      const auto rc = lrp_linear_redistribute(z, out_rel);
      for (int i = 0; i < n; ++i) oracle[i] += rc[i];
    }
    std::vector<double> detach_rel(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) {
        const std::size_t idx = static_cast<std::size_t>(i) * d + c;
        detach_rel[i] += x0[idx] * x.grad()[idx];
      }
    CHECK(oracles::max_abs_err(detach_rel, oracle) <= 1e-8);
  }
}

TEST_CASE("detach-based LN relevance equals the explicit redistribution oracle") {
  Rng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    const auto x0 = oracles::random_vec(rng, n, -2.0, 2.0);
    const auto w0 = oracles::random_vec(rng, n);
    const double eps = 1e-6;

    Graph g;
    Tensor x = g.leaf({1, n}, x0, true);
    Tensor ln = g.layernorm_core(x, eps, true);
    g.backward(g.sum(g.mul(ln, g.constant({1, n}, w0))));

    Mat z(n, n);
    std::vector<double> out_rel(n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) z.at(i, j) = x0[i] * ((i == j ? 1.0 : 0.0) - 1.0 / n);
      out_rel[j] = ln.values()[j] * w0[j];
    }
    const auto oracle = lrp_linear_redistribute(z, out_rel);
    std::vector<double> detach_rel(n);
    for (int i = 0; i < n; ++i) detach_rel[i] = x0[i] * x.grad()[i];
    CHECK(oracles::max_abs_err(detach_rel, oracle) <= 1e-8);
  }
}

TEST_CASE("per-head conservation and zero query relevance under AH detach") {
  TransformerModel m = init_model(small_config(13, 12, 3, 2), 77);
  const std::vector<int> toks{2, 5, 8, 11, 1};
  ForwardTrace t = forward(m, toks, DetachMode::kAh);
  t.graph->backward(t.graph->select(t.logits, 0));
  for (const auto& layer : t.heads) {
    for (const auto& h : layer) {
      double r_in = 0.0, r_out = 0.0, q_rel = 0.0;
      for (std::size_t k = 0; k < h.x_tap.numel(); ++k) {
        r_in += h.x_tap.values()[k] * h.x_tap.grad()[k];
        r_out += h.mix.values()[k] * h.mix.grad()[k];
        q_rel += std::abs(h.xq_tap.grad()[k]);
      }
      CHECK(std::abs(r_in - r_out) <= 1e-8 * std::max(1.0, std::abs(r_out)));
      CHECK(q_rel == 0.0);
    }
  }
}

TEST_CASE("per-LN conservation under LN detach") {
  TransformerModel m = init_model(small_config(), 78);
  const std::vector<int> toks{4, 9, 2, 6};
  ForwardTrace t = forward(m, toks, DetachMode::kLn);
  t.graph->backward(t.graph->select(t.logits, 1));
  for (const auto& ln : t.lns) {
    double r_in = 0.0, r_out = 0.0;
    for (std::size_t k = 0; k < ln.input.numel(); ++k) {
      r_in += ln.input.values()[k] * ln.input.grad()[k];
      r_out += ln.core.values()[k] * ln.core.grad()[k];
    }
    CHECK(std::abs(r_in - r_out) <= 1e-8 * std::max(1.0, std::abs(r_out)));
  }
}

TEST_CASE("a_last: single token, uniform gates, and forward-pass extraction") {
  TransformerModel m = init_model(small_config(), 90);
  const auto tgt = ExplanationTarget::logit(0);

  Explanation one = explain_attention_last(m, {5}, tgt);
  REQUIRE(one.token_relevances.size() == 1);
  CHECK(one.token_relevances[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Zero key/query weights in the last layer -> uniform attention.
  TransformerModel mz = m;
  for (int h = 0; h < mz.config.n_heads; ++h) {
    const std::string hp = "layers.1.heads." + std::to_string(h) + ".";
    auto& wk = mz.param(hp + "w_k").values;
    auto& wq = mz.param(hp + "w_q").values;
    std::fill(wk.begin(), wk.end(), 0.0);
    std::fill(wq.begin(), wq.end(), 0.0);
  }
  const std::vector<int> toks{1, 2, 3, 4};
  Explanation uz = explain_attention_last(mz, toks, tgt);
  for (double v : uz.token_relevances) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // Random model: equals the head/column mean of the recorded gates.
  Explanation e = explain_attention_last(m, toks, tgt);
  ForwardTrace t = forward(m, toks, DetachMode::kNone);
  const int n = static_cast<int>(toks.size());
  for (int i = 0; i < n; ++i) {
    double want = 0.0;
    for (const auto& h : t.heads.back())
      for (int j = 0; j < n; ++j) want += h.p.at(i, j);
    want /= static_cast<double>(t.heads.back().size()) * n;
    CHECK(e.token_relevances[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("rollout recurrence: uniform and identity attention") {
  Mat uniform(2, 2, 0.5);
  Mat r1 = rollout_product({uniform});
  CHECK(r1.at(0, 0) == doctest::Approx(0.75));
  CHECK(r1.at(0, 1) == doctest::Approx(0.25));
  CHECK(r1.at(1, 0) == doctest::Approx(0.25));
  CHECK(r1.at(1, 1) == doctest::Approx(0.75));

  Mat id = Mat::eye(3);
  Mat r2 = rollout_product({id, id});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(r2.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("rollout rows stay stochastic and model relevances sum to one") {
  Rng rng(91);
  std::vector<Mat> stack;
  for (int l = 0; l < 3; ++l) {
    Mat a(5, 5);
    for (int i = 0; i < 5; ++i) {
      double row = 0.0;
      for (int j = 0; j < 5; ++j) {
        a.at(i, j) = rng.uniform(0.0, 1.0);
        row += a.at(i, j);
      }
      for (int j = 0; j < 5; ++j) a.at(i, j) /= row;
    }
    stack.push_back(a);
  }
  Mat r = rollout_product(stack);
  for (int i = 0; i < 5; ++i) {
    double row = 0.0;
    for (int j = 0; j < 5; ++j) row += r.at(i, j);
    CHECK(std::abs(row - 1.0) <= 1e-12);
  }

  TransformerModel m = init_model(small_config(), 92);
  Explanation e = explain_rollout(m, {1, 2, 3, 4, 5}, ExplanationTarget::logit(0));
  CHECK(std::abs(oracles::sum(e.token_relevances) - 1.0) <= 1e-12);
}

TEST_CASE("attention flow: one-hop graph returns the source row") {
  Mat a(3, 3);
  a.at(0, 0) = 0.6; a.at(0, 1) = 0.3; a.at(0, 2) = 0.1;
  a.at(1, 0) = 0.2; a.at(1, 1) = 0.5; a.at(1, 2) = 0.3;
  a.at(2, 0) = 0.1; a.at(2, 1) = 0.1; a.at(2, 2) = 0.8;
  const auto rel = attention_flow_relevance({a}, {0.0, 1.0, 0.0});
  CHECK(rel[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(rel[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rel[2] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("attention flow: two layers match brute-force min cut") {
  Rng rng(93);
  const int n = 3, layers = 2;
  std::vector<Mat> stack;
  for (int l = 0; l < layers; ++l) {
    Mat a(n, n);
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) {
        a.at(i, j) = rng.uniform(0.05, 1.0);
        row += a.at(i, j);
      }
      for (int j = 0; j < n; ++j) a.at(i, j) /= row;
    }
    stack.push_back(a);
  }
  const std::vector<double> src{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto rel = attention_flow_relevance(stack, src);

  // Independent answer: enumerate cuts of the same layered graph.
  const int n_nodes = 1 + (layers + 1) * n;
  auto node = [n](int level, int j) { return 1 + level * n + j; };
  for (int target = 0; target < n; ++target) {
    std::vector<std::tuple<int, int, double>> edges;
    for (int j = 0; j < n; ++j) edges.emplace_back(0, node(layers, j), src[j]);
    for (int l = layers; l >= 1; --l)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) edges.emplace_back(node(l, j), node(l - 1, i), stack[l - 1].at(j, i));
    double best = 1e300;
    const int t_node = node(0, target);
    for (unsigned mask = 0; mask < (1u << n_nodes); ++mask) {
      if (!(mask & 1u) || (mask & (1u << t_node))) continue;
      double cut = 0.0;
      for (const auto& [u, v, c] : edges)
        if ((mask & (1u << u)) && !(mask & (1u << v))) cut += c;
      best = std::min(best, cut);
    }
    CHECK(std::abs(rel[target] - best) <= 1e-9);
  }

  // Each per-token flow is independently bounded by the total source capacity.
  for (double v : rel) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("attention flow refuses over-long sequences") {
  TransformerModel m = init_model(small_config(), 94);
  const std::vector<int> toks{1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(explain_attention_flow(m, toks, ExplanationTarget::logit(0), 4),
                  std::runtime_error);
  CHECK_NOTHROW(explain_attention_flow(m, toks, ExplanationTarget::logit(0), 8));
}

TEST_CASE("gae: zero gradients give zero relevance; single layer matches hand form") {
  // Constant f -> every gate gradient is zero.
  TransformerModel m = init_model(small_config(), 95);
  auto& w = m.param("classifier.weight").values;
  std::fill(w.begin(), w.end(), 0.0);
  Explanation z = explain_gae(m, {1, 2, 3}, ExplanationTarget::logit(0));
  for (double v : z.token_relevances) CHECK(v == 0.0);

  // One layer, one head: relevance = column means of the clamped A .* dA.
  ModelConfig c1 = small_config(11, 8, 1, 1);
  TransformerModel m1 = init_model(c1, 96);
  const std::vector<int> toks{3, 6, 9, 1};
  const auto tgt = ExplanationTarget::logit(1);
  Explanation e = explain_gae(m1, toks, tgt);

  ForwardTrace t = forward(m1, toks, DetachMode::kNone);
  t.graph->backward(t.graph->select(t.logits, 1));
  const auto& h = t.heads[0][0];
  const int n = static_cast<int>(toks.size());
  std::vector<double> want(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double prod = h.p.at(i, j) * h.p.grad()[static_cast<std::size_t>(i) * n + j];
      if (prod > 0.0) want[i] += prod / n;  // mean over output position j
    }
  CHECK(oracles::max_abs_err(e.token_relevances, want) <= 1e-12);
}

TEST_CASE("attention baselines are non-negative on random models") {
  Rng seeds(97);
  for (int trial = 0; trial < 3; ++trial) {
    TransformerModel m = init_model(small_config(), seeds.next_u64());
    const std::vector<int> toks{1, 4, 7, 2, 9, 5};
    const auto tgt = ExplanationTarget::logit(0);
    for (Method mm : {Method::kALast, Method::kRollout, Method::kAFlow, Method::kGae}) {
      Explanation e = explain(m, toks, mm, tgt);
      for (double v : e.token_relevances) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("random explanations are seeded and reproducible") {
  const std::vector<int> toks{1, 2, 3, 4, 5};
  Explanation a = explain_random(toks, 1);
  Explanation b = explain_random(toks, 1);
  Explanation c = explain_random(toks, 2);
  CHECK(a.token_relevances == b.token_relevances);
  CHECK(a.token_relevances != c.token_relevances);
  CHECK(a.has_seed);
  CHECK(a.seed == 1);
}

TEST_CASE("explanations are deterministic across repeated calls") {
  TransformerModel m = init_model(small_config(), 98);
  const std::vector<int> toks{2, 8, 5, 1};
  const auto tgt = ExplanationTarget::logit_diff(0, 1);
  for (Method mm : {Method::kGi, Method::kLrpAhLn, Method::kRollout, Method::kGae}) {
    Explanation a = explain(m, toks, mm, tgt);
    Explanation b = explain(m, toks, mm, tgt);
    CHECK(a.token_relevances == b.token_relevances);
    CHECK(a.output_score == b.output_score);
  }
}

TEST_CASE("target kinds and validation") {
  TransformerModel m = init_model(small_config(), 99);
  const std::vector<int> toks{1, 2, 3};
  const auto lg = logits_of(m, toks);

  Explanation d = explain_gradient_x_input(m, toks, ExplanationTarget::logit_diff(0, 1),
                                           DetachMode::kNone);
  CHECK(d.output_score == doctest::Approx(lg[0] - lg[1]).epsilon(1e-12));

  Explanation p = explain_gradient_x_input(m, toks, ExplanationTarget::log_prob(0),
                                           DetachMode::kNone);
  const double lse = std::log(std::exp(lg[0]) + std::exp(lg[1]));
  CHECK(p.output_score == doctest::Approx(lg[0] - lse).epsilon(1e-10));

  CHECK_THROWS_AS(explain_gradient_x_input(m, toks, ExplanationTarget::logit(5),
                                           DetachMode::kNone),
                  std::invalid_argument);
  CHECK(method_from_string("lrp_ah_ln") == Method::kLrpAhLn);
  CHECK(to_string(Method::kAFlow) == "a_flow");
  CHECK_THROWS_AS(method_from_string("nope"), std::invalid_argument);
}
