#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lrpx/tensor.hpp"
#include "oracles.hpp"

using namespace lrpx;

namespace {

// Rebuilds the graph at perturbed inputs and compares backward() against
// central finite differences.
void gradcheck(const Shape& shape, const std::vector<double>& x0,
               const std::function<Tensor(Graph&, Tensor)>& fn, double tol = 1e-4) {
  Graph g;
  Tensor x = g.leaf(shape, x0, true);
  Tensor y = fn(g, x);
  g.backward(y);
  const std::vector<double> analytic = x.grad();

  auto eval = [&](const std::vector<double>& v) {
    Graph g2;
    Tensor x2 = g2.leaf(shape, v, true);
    return fn(g2, x2).scalar();
  };
  const std::vector<double> numeric = oracles::finite_diff(eval, x0);
  const double err = oracles::max_rel_err(analytic, numeric);
  INFO("max relative gradient error " << err);
  CHECK(err <= tol);
}

// Reduces a tensor to a scalar with fixed random weights so every output
// entry influences the root.
Tensor weighted_sum(Graph& g, Tensor t, std::uint64_t seed) {
  Rng rng(seed);
  auto w = oracles::random_vec(rng, t.numel(), -1.0, 1.0);
  Tensor wt = g.constant(t.shape(), w);
  return g.sum(g.mul(t, wt));
}

}  // namespace

TEST_CASE("gradcheck: matmul wrt both operands") {
  Rng rng(101);
  const auto a0 = oracles::random_vec(rng, 3 * 4);
  const auto b0 = oracles::random_vec(rng, 4 * 2);

  gradcheck({3, 4}, a0, [&](Graph& g, Tensor x) {
    Tensor b = g.constant({4, 2}, b0);
    return weighted_sum(g, g.matmul(x, b), 1);
  });
  gradcheck({4, 2}, b0, [&](Graph& g, Tensor x) {
    Tensor a = g.constant({3, 4}, a0);
    return weighted_sum(g, g.matmul(a, x), 2);
  });
}

TEST_CASE("gradcheck: elementwise ops") {
  Rng rng(102);
  const auto x0 = oracles::random_vec(rng, 12);
  const auto y0 = oracles::random_vec(rng, 12);

  gradcheck({3, 4}, x0, [&](Graph& g, Tensor x) {
    Tensor y = g.constant({3, 4}, y0);
    return weighted_sum(g, g.add(x, y), 3);
  });
  gradcheck({3, 4}, x0, [&](Graph& g, Tensor x) {
    Tensor y = g.constant({3, 4}, y0);
    return weighted_sum(g, g.sub(x, y), 4);
  });
  gradcheck({3, 4}, x0, [&](Graph& g, Tensor x) {
    Tensor y = g.constant({3, 4}, y0);
    return weighted_sum(g, g.mul(x, y), 5);
  });
  gradcheck({3, 4}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.scale(x, -2.5), 6); });
  gradcheck({3, 4}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.transpose(x), 7); });
  gradcheck({3, 4}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.identity(x), 8); });
}

TEST_CASE("gradcheck: activations") {
  // Values kept away from the ReLU kink so finite differences are valid.
  std::vector<double> x0{-1.7, -0.9, -0.3, 0.4, 0.8, 1.9, -2.2, 1.1};
  gradcheck({2, 4}, x0, [&](Graph& g, Tensor x) { return weighted_sum(g, g.relu(x), 9); });
  gradcheck({2, 4}, x0, [&](Graph& g, Tensor x) { return weighted_sum(g, g.gelu(x), 10); });
}

TEST_CASE("relu derivative at zero follows the 0/0 = 0 convention") {
  Graph g;
  Tensor x = g.leaf({3}, {0.0, -1.0, 2.0}, true);
  g.backward(g.sum(g.relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("gradcheck: softmax along both axes") {
  Rng rng(103);
  const auto x0 = oracles::random_vec(rng, 4 * 3, -2.0, 2.0);
  gradcheck({4, 3}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.softmax(x, 0), 11); });
  gradcheck({4, 3}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.softmax(x, 1), 12); });
  const auto v0 = oracles::random_vec(rng, 6, -2.0, 2.0);
  gradcheck({6}, v0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.softmax(x, 0), 13); });
}

TEST_CASE("softmax backward equals the analytic Jacobian p_i(delta_ik - p_k)") {
  Rng rng(104);
  const int n = 7;
  const auto x0 = oracles::random_vec(rng, n, -3.0, 3.0);

  // Forward once for the probabilities.
  Graph g0;
  Tensor p0 = g0.softmax(g0.leaf({n}, x0, true), 0);
  const std::vector<double> p = p0.values();
  double psum = 0.0;
  for (double v : p) psum += v;
  CHECK(std::abs(psum - 1.0) <= 1e-12);

  for (int i = 0; i < n; ++i) {
    Graph g;
    Tensor x = g.leaf({n}, x0, true);
    g.backward(g.select(g.softmax(x, 0), i));
    for (int k = 0; k < n; ++k) {
      const double want = p[i] * ((i == k ? 1.0 : 0.0) - p[k]);
      CHECK(std::abs(x.grad()[k] - want) <= 1e-10);
    }
  }
}

TEST_CASE("softmax over columns of a matrix is column-stochastic") {
  Rng rng(105);
  Graph g;
  Tensor x = g.leaf({5, 3}, oracles::random_vec(rng, 15, -4.0, 4.0), false);
  Tensor p = g.softmax(x, 0);
  for (int j = 0; j < 3; ++j) {
    double col = 0.0;
    for (int i = 0; i < 5; ++i) col += p.at(i, j);
    CHECK(std::abs(col - 1.0) <= 1e-12);
  }
}

TEST_CASE("gradcheck: layernorm core, full backward") {
  Rng rng(106);
  const auto x0 = oracles::random_vec(rng, 3 * 6, -2.0, 2.0);
  for (double eps : {1e-6, 1e-2, 1.0}) {
    gradcheck({3, 6}, x0, [&](Graph& g, Tensor x) {
      return weighted_sum(g, g.layernorm_core(x, eps, false), 14);
    });
  }
}

TEST_CASE("layernorm core with detached scale acts as a fixed linear map") {
  Rng rng(107);
  const int n = 8;
  const auto x0 = oracles::random_vec(rng, n, -2.0, 2.0);
  Graph g0;
  Tensor y0 = g0.layernorm_core(g0.leaf({1, n}, x0, true), 1e-6, true);
  const std::vector<double> y = y0.values();

  for (int j = 0; j < n; ++j) {
    Graph g;
    Tensor x = g.leaf({1, n}, x0, true);
    Tensor yn = g.layernorm_core(x, 1e-6, true);
    g.backward(g.select(yn, j));
    // Row of a centering map scaled by a constant: entries sum to zero and
    // the map is linear, so grad . x reproduces the output exactly.
    double row_sum = 0.0, dot = 0.0;
    for (int i = 0; i < n; ++i) {
      row_sum += x.grad()[i];
      dot += x.grad()[i] * x0[i];
    }
    CHECK(std::abs(row_sum) <= 1e-10);
    CHECK(std::abs(dot - y[j]) <= 1e-10);
  }
}

TEST_CASE("layernorm rejects non-positive eps") {
  Graph g;
  Tensor x = g.leaf({1, 4}, {1, 2, 3, 4}, false);
  CHECK_THROWS_AS(g.layernorm_core(x, 0.0, false), std::invalid_argument);
  CHECK_THROWS_AS(g.layernorm_core(x, -1.0, true), std::invalid_argument);
}

TEST_CASE("gradcheck: reductions and selections") {
  Rng rng(108);
  const auto x0 = oracles::random_vec(rng, 4 * 5);
  gradcheck({4, 5}, x0, [&](Graph& g, Tensor x) { return g.sum(x); });
  gradcheck({4, 5}, x0, [&](Graph& g, Tensor x) { return g.mean_all(x); });
  gradcheck({4, 5}, x0, [&](Graph& g, Tensor x) { return g.variance_all(x); });
  gradcheck({4, 5}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.mean_axis0(x), 15); });
  gradcheck({4, 5}, x0, [&](Graph& g, Tensor x) { return g.select(x, 13); });
  gradcheck({4, 5}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.take_row(x, 2), 16); });
}

TEST_CASE("gradcheck: log_softmax") {
  Rng rng(109);
  const auto x0 = oracles::random_vec(rng, 6, -3.0, 3.0);
  gradcheck({6}, x0,
            [&](Graph& g, Tensor x) { return weighted_sum(g, g.log_softmax(x), 17); });
  // log_softmax of a shifted input is unchanged.
  Graph g;
  Tensor a = g.leaf({6}, x0, false);
  std::vector<double> shifted(x0);
  for (auto& v : shifted) v += 5.0;
  Tensor b = g.leaf({6}, shifted, false);
  CHECK(oracles::max_abs_err(g.log_softmax(a).values(), g.log_softmax(b).values()) <= 1e-12);
}

TEST_CASE("gradcheck: row-vector broadcast ops") {
  Rng rng(110);
  const auto x0 = oracles::random_vec(rng, 3 * 4);
  const auto b0 = oracles::random_vec(rng, 4);
  const auto g0 = oracles::random_vec(rng, 4, 0.5, 1.5);

  gradcheck({3, 4}, x0, [&](Graph& g, Tensor x) {
    return weighted_sum(g, g.add_rowvec(x, g.constant({1, 4}, b0)), 18);
  });
  gradcheck({1, 4}, b0, [&](Graph& g, Tensor b) {
    return weighted_sum(g, g.add_rowvec(g.constant({3, 4}, x0), b), 19);
  });
  gradcheck({3, 4}, x0, [&](Graph& g, Tensor x) {
    return weighted_sum(
        g, g.rowwise_affine(x, g.constant({1, 4}, g0), g.constant({1, 4}, b0)), 20);
  });
  gradcheck({1, 4}, g0, [&](Graph& g, Tensor gm) {
    return weighted_sum(
        g, g.rowwise_affine(g.constant({3, 4}, x0), gm, g.constant({1, 4}, b0)), 21);
  });
  gradcheck({1, 4}, b0, [&](Graph& g, Tensor bt) {
    return weighted_sum(
        g, g.rowwise_affine(g.constant({3, 4}, x0), g.constant({1, 4}, g0), bt), 22);
  });
}

TEST_CASE("gradcheck: concat_rows") {
  Rng rng(111);
  const auto a0 = oracles::random_vec(rng, 2 * 3);
  const auto b0 = oracles::random_vec(rng, 4 * 3);
  gradcheck({2, 3}, a0, [&](Graph& g, Tensor a) {
    return weighted_sum(g, g.concat_rows(a, g.constant({4, 3}, b0)), 23);
  });
  gradcheck({4, 3}, b0, [&](Graph& g, Tensor b) {
    return weighted_sum(g, g.concat_rows(g.constant({2, 3}, a0), b), 24);
  });
}

TEST_CASE("gradcheck: embedding gather with repeated ids") {
  Rng rng(112);
  const auto t0 = oracles::random_vec(rng, 5 * 3);
  const std::vector<int> ids{1, 3, 1, 0};
  gradcheck({5, 3}, t0, [&](Graph& g, Tensor table) {
    return weighted_sum(g, g.embedding(table, ids), 25);
  });
  Graph g;
  Tensor table = g.leaf({5, 3}, t0, false);
  CHECK_THROWS_AS(g.embedding(table, {5}), std::invalid_argument);
  CHECK_THROWS_AS(g.embedding(table, {-1}), std::invalid_argument);
}

TEST_CASE("gradcheck: composite graph covering the op set") {
  Rng rng(113);
  const auto x0 = oracles::random_vec(rng, 4 * 4, -1.0, 1.0);
  const auto w0 = oracles::random_vec(rng, 4 * 4);
  const auto b0 = oracles::random_vec(rng, 4);
  gradcheck({4, 4}, x0, [&](Graph& g, Tensor x) {
    Tensor w = g.constant({4, 4}, w0);
    Tensor b = g.constant({1, 4}, b0);
    Tensor h = g.relu(g.add_rowvec(g.matmul(x, w), b));
    Tensor ln = g.layernorm_core(h, 1e-5, false);
    Tensor p = g.softmax(g.matmul(ln, g.transpose(x)), 0);
    Tensor mix = g.matmul(g.transpose(p), ln);
    return weighted_sum(g, g.gelu(mix), 26);
  });
}

TEST_CASE("detach stops gradients and reuses values") {
  Graph g;
  Tensor x = g.leaf({1}, {3.0}, true);
  Tensor y = g.mul(x, g.detach(x));  // d/dx of x * const(3) = 3
  CHECK(y.scalar() == 9.0);
  CHECK(!g.detach(x).requires_grad());
  g.backward(g.sum(y));
  CHECK(x.grad()[0] == 3.0);

  // Without detach the same expression gives 2x = 6.
  Graph g2;
  Tensor x2 = g2.leaf({1}, {3.0}, true);
  g2.backward(g2.sum(g2.mul(x2, x2)));
  CHECK(x2.grad()[0] == 6.0);
}

TEST_CASE("backward skips subgraphs that never receive gradient") {
  Graph g;
  Tensor x = g.leaf({2, 2}, {1, 2, 3, 4}, true);
  Tensor unused = g.relu(x);  // never connected to the root
  Tensor gate = g.softmax(x, 1);
  Tensor frozen = g.detach(gate);
  Tensor y = g.sum(g.mul(frozen, x));
  g.backward(y);

  CHECK(!g.node(unused.id).grad_seeded);
  CHECK(!g.node(gate.id).grad_seeded);
  CHECK(g.node(x.id).grad_seeded);
  // Gradient equals the frozen gate values.
  CHECK(oracles::max_abs_err(x.grad(), frozen.values()) == 0.0);
}

TEST_CASE("gradients accumulate across multiple uses and reset across calls") {
  Graph g;
  Tensor x = g.leaf({3}, {1.0, -2.0, 0.5}, true);
  Tensor a = g.constant({3}, {2.0, 3.0, 4.0});
  Tensor b = g.constant({3}, {-1.0, 1.0, 5.0});
  Tensor y = g.sum(g.add(g.mul(x, a), g.mul(x, b)));
  g.backward(y);
  CHECK(x.grad() == std::vector<double>{1.0, 4.0, 9.0});
  g.backward(y);  // same result, not doubled
  CHECK(x.grad() == std::vector<double>{1.0, 4.0, 9.0});
}

TEST_CASE("backward rejects non-scalar roots and shape errors throw") {
  Graph g;
  Tensor x = g.leaf({2, 2}, {1, 2, 3, 4}, true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
  Tensor w = g.leaf({3, 2}, {1, 2, 3, 4, 5, 6}, false);
  CHECK_THROWS_AS(g.matmul(x, w), std::invalid_argument);
  CHECK_THROWS_AS(g.add(x, w), std::invalid_argument);
  CHECK_THROWS_AS(g.select(x, 4), std::invalid_argument);
  CHECK_THROWS_AS(g.take_row(x, 2), std::invalid_argument);
}
