#include "lrpx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lrpx/kernels.hpp"

namespace lrpx {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Rows/cols of a 1-D or 2-D shape; vectors are treated as a single row.
int rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
int cols_of(const Shape& s) { return s.size() == 2 ? s[1] : (s.empty() ? 1 : s[0]); }

}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

const Shape& Tensor::shape() const { return graph->node(id).shape; }
const std::vector<double>& Tensor::values() const { return graph->node(id).values; }
const std::vector<double>& Tensor::grad() const { return graph->node(id).grad; }
bool Tensor::requires_grad() const { return graph->node(id).requires_grad; }
int Tensor::rows() const { return rows_of(shape()); }
int Tensor::cols() const { return cols_of(shape()); }
std::size_t Tensor::numel() const { return graph->node(id).numel(); }

double Tensor::scalar() const {
  require(numel() == 1, "Tensor::scalar: tensor is not a scalar");
  return values()[0];
}

double Tensor::at(int r, int c) const {
  return values()[static_cast<std::size_t>(r) * cols() + c];
}

int Graph::new_node(Shape shape, std::vector<double> values, bool requires_grad,
                    std::vector<int> parents, const char* op) {
  require(values.size() == shape_numel(shape), std::string(op) + ": values/shape mismatch");
  Node n;
  n.shape = std::move(shape);
  n.grad.assign(values.size(), 0.0);
  n.values = std::move(values);
  n.requires_grad = requires_grad;
  n.parents = std::move(parents);
  n.op = op;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

bool Graph::any_requires_grad(const std::vector<int>& ids) const {
  return std::any_of(ids.begin(), ids.end(),
                     [this](int i) { return nodes_[i].requires_grad; });
}

Tensor Graph::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  return handle(new_node(std::move(shape), std::move(values), requires_grad, {}, "leaf"));
}

Tensor Graph::constant(Shape shape, std::vector<double> values) {
  return leaf(std::move(shape), std::move(values), false);
}

Tensor Graph::scalar_leaf(double v, bool requires_grad) {
  return leaf({1}, {v}, requires_grad);
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  require(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be 2-D");
  const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  require(k == k2, "matmul: inner dimensions disagree " + shape_str(a.shape()) + " * " +
                       shape_str(b.shape()));
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  kernels::matmul_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  const bool rg = any_requires_grad({a.id, b.id});
  int id = new_node({m, n}, std::move(out), rg, {a.id, b.id}, "matmul");
  if (rg) {
    nodes_[id].backward_fn = [m, k, n](Graph& g, int self) {
      const Node& s = g.node(self);
      const int pa = s.parents[0], pb = s.parents[1];
      if (auto* ga = g.grad_sink(pa)) {
        kernels::matmul_nt(s.grad.data(), g.node(pb).values.data(), ga->data(), m, n, k);
      }
      if (auto* gb = g.grad_sink(pb)) {
        kernels::matmul_tn(g.node(pa).values.data(), s.grad.data(), gb->data(), k, m, n);
      }
    };
  }
  return handle(id);
}

Tensor Graph::add(Tensor a, Tensor b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  std::vector<double> out(a.numel());
  kernels::add(a.values().data(), b.values().data(), out.data(), out.size());
  const bool rg = any_requires_grad({a.id, b.id});
  int id = new_node(a.shape(), std::move(out), rg, {a.id, b.id}, "add");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      for (int p : s.parents) {
        if (auto* gp = g.grad_sink(p)) {
          kernels::axpy(1.0, s.grad.data(), gp->data(), s.numel());
        }
      }
    };
  }
  return handle(id);
}

Tensor Graph::sub(Tensor a, Tensor b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  const bool rg = any_requires_grad({a.id, b.id});
  int id = new_node(a.shape(), std::move(out), rg, {a.id, b.id}, "sub");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) kernels::axpy(1.0, s.grad.data(), ga->data(), s.numel());
      if (auto* gb = g.grad_sink(s.parents[1])) kernels::axpy(-1.0, s.grad.data(), gb->data(), s.numel());
    };
  }
  return handle(id);
}

Tensor Graph::mul(Tensor a, Tensor b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  std::vector<double> out(a.numel());
  kernels::mul(a.values().data(), b.values().data(), out.data(), out.size());
  const bool rg = any_requires_grad({a.id, b.id});
  int id = new_node(a.shape(), std::move(out), rg, {a.id, b.id}, "mul");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      const int pa = s.parents[0], pb = s.parents[1];
      if (auto* ga = g.grad_sink(pa)) {
        const auto& bv = g.node(pb).values;
        for (std::size_t i = 0; i < s.numel(); ++i) (*ga)[i] += s.grad[i] * bv[i];
      }
      if (auto* gb = g.grad_sink(pb)) {
        const auto& av = g.node(pa).values;
        for (std::size_t i = 0; i < s.numel(); ++i) (*gb)[i] += s.grad[i] * av[i];
      }
    };
  }
  return handle(id);
}

Tensor Graph::scale(Tensor a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "scale");
  if (rg) {
    nodes_[id].backward_fn = [c](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) kernels::axpy(c, s.grad.data(), ga->data(), s.numel());
    };
  }
  return handle(id);
}

Tensor Graph::transpose(Tensor a) {
  require(a.shape().size() == 2, "transpose: operand must be 2-D");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = a.at(i, j);
  const bool rg = a.requires_grad();
  int id = new_node({n, m}, std::move(out), rg, {a.id}, "transpose");
  if (rg) {
    nodes_[id].backward_fn = [m, n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < m; ++i)
            (*ga)[static_cast<std::size_t>(i) * n + j] += s.grad[static_cast<std::size_t>(j) * m + i];
      }
    };
  }
  return handle(id);
}

// Numerically stabilized by max-subtraction. axis 0 normalizes columns,
// axis 1 rows; a flat vector is a single slice under either axis.
Tensor Graph::softmax(Tensor a, int axis) {
  require(axis == 0 || axis == 1, "softmax: axis must be 0 or 1");
  require(a.shape().size() <= 2, "softmax: operand must be 1-D or 2-D");
  const int m = a.rows(), n = a.cols();
  const bool columns = (a.shape().size() == 2) ? (axis == 0) : false;
  const int n_slices = columns ? n : m;
  const int slice_len = columns ? m : n;
  auto idx = [columns, n](int slice, int k) -> std::size_t {
    return columns ? static_cast<std::size_t>(k) * n + slice
                   : static_cast<std::size_t>(slice) * n + k;
  };
  std::vector<double> out(a.numel());
  const auto& v = a.values();
  for (int s = 0; s < n_slices; ++s) {
    double mx = v[idx(s, 0)];
    for (int k = 1; k < slice_len; ++k) mx = std::max(mx, v[idx(s, k)]);
    double denom = 0.0;
    for (int k = 0; k < slice_len; ++k) {
      const double e = std::exp(v[idx(s, k)] - mx);
      out[idx(s, k)] = e;
      denom += e;
    }
    for (int k = 0; k < slice_len; ++k) out[idx(s, k)] /= denom;
  }
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "softmax");
  if (rg) {
    nodes_[id].backward_fn = [n_slices, slice_len, idx](Graph& g, int self) {
      const Node& s = g.node(self);
      auto* ga = g.grad_sink(s.parents[0]);
      if (!ga) return;
      // g_in = p .* (g_out - <p, g_out>) per slice
      for (int sl = 0; sl < n_slices; ++sl) {
        double dot = 0.0;
        for (int k = 0; k < slice_len; ++k) dot += s.values[idx(sl, k)] * s.grad[idx(sl, k)];
        for (int k = 0; k < slice_len; ++k) {
          (*ga)[idx(sl, k)] += s.values[idx(sl, k)] * (s.grad[idx(sl, k)] - dot);
        }
      }
    };
  }
  return handle(id);
}

// y = (x - E[x]) / sqrt(eps + Var[x]) per row, uniform 1/N mean and variance.
// With detach_scale the rescaling factor is a constant in backward, leaving
// only the centering map's gradient.
Tensor Graph::layernorm_core(Tensor a, double eps, bool detach_scale) {
  require(eps > 0.0, "layernorm_core: eps must be positive");
  require(a.shape().size() <= 2, "layernorm_core: operand must be 1-D or 2-D");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  std::vector<double> alphas(m);
  const auto& v = a.values();
  for (int r = 0; r < m; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * n;
    double mean = 0.0;
    for (int c = 0; c < n; ++c) mean += v[base + c];
    mean /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) {
      const double d = v[base + c] - mean;
      var += d * d;
    }
    var /= n;
    const double alpha = 1.0 / std::sqrt(eps + var);
    alphas[r] = alpha;
    for (int c = 0; c < n; ++c) out[base + c] = (v[base + c] - mean) * alpha;
  }
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "layernorm_core");
  if (rg) {
    nodes_[id].backward_fn = [m, n, alphas = std::move(alphas), detach_scale](Graph& g, int self) {
      const Node& s = g.node(self);
      auto* ga = g.grad_sink(s.parents[0]);
      if (!ga) return;
      for (int r = 0; r < m; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * n;
        double gmean = 0.0;
        for (int c = 0; c < n; ++c) gmean += s.grad[base + c];
        gmean /= n;
        if (detach_scale) {
          for (int c = 0; c < n; ++c) {
            (*ga)[base + c] += alphas[r] * (s.grad[base + c] - gmean);
          }
        } else {
          double gydot = 0.0;
          for (int c = 0; c < n; ++c) gydot += s.grad[base + c] * s.values[base + c];
          gydot /= n;
          for (int c = 0; c < n; ++c) {
            (*ga)[base + c] +=
                alphas[r] * (s.grad[base + c] - gmean - s.values[base + c] * gydot);
          }
        }
      }
    };
  }
  return handle(id);
}

Tensor Graph::detach(Tensor a) {
  // Same values, no parents: the backward sweep never crosses this node.
  return handle(new_node(a.shape(), a.values(), false, {}, "detach"));
}

Tensor Graph::identity(Tensor a) {
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), a.values(), rg, {a.id}, "identity");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) kernels::axpy(1.0, s.grad.data(), ga->data(), s.numel());
    };
  }
  return handle(id);
}

Tensor Graph::relu(Tensor a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "relu");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        const auto& x = g.node(s.parents[0]).values;
        for (std::size_t i = 0; i < s.numel(); ++i)
          if (x[i] > 0.0) (*ga)[i] += s.grad[i];
      }
    };
  }
  return handle(id);
}

Tensor Graph::gelu(Tensor a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "gelu");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        const auto& x = g.node(s.parents[0]).values;
        for (std::size_t i = 0; i < s.numel(); ++i) {
          const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
          (*ga)[i] += s.grad[i] * (cdf + x[i] * pdf);
        }
      }
    };
  }
  return handle(id);
}

Tensor Graph::embedding(Tensor table, const std::vector<int>& ids) {
  require(table.shape().size() == 2, "embedding: table must be 2-D");
  const int vocab = table.rows(), d = table.cols();
  for (int t : ids) {
    require(t >= 0 && t < vocab, "embedding: unknown token id " + std::to_string(t));
  }
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const double* row = table.values().data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(row, row + d, out.begin() + static_cast<std::size_t>(i) * d);
  }
  const bool rg = table.requires_grad();
  int id = new_node({n, d}, std::move(out), rg, {table.id}, "embedding");
  if (rg) {
    nodes_[id].backward_fn = [ids, d](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* gt = g.grad_sink(s.parents[0])) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          kernels::axpy_serial(1.0, s.grad.data() + i * d,
                               gt->data() + static_cast<std::size_t>(ids[i]) * d, d);
        }
      }
    };
  }
  return handle(id);
}

Tensor Graph::mean_axis0(Tensor a) {
  require(a.shape().size() == 2, "mean_axis0: operand must be 2-D");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[j] += a.at(i, j);
  for (int j = 0; j < n; ++j) out[j] /= m;
  const bool rg = a.requires_grad();
  int id = new_node({1, n}, std::move(out), rg, {a.id}, "mean_axis0");
  if (rg) {
    nodes_[id].backward_fn = [m, n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            (*ga)[static_cast<std::size_t>(i) * n + j] += s.grad[j] / m;
      }
    };
  }
  return handle(id);
}

Tensor Graph::mean_all(Tensor a) {
  const std::size_t n = a.numel();
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const bool rg = a.requires_grad();
  int id = new_node({1}, {acc / static_cast<double>(n)}, rg, {a.id}, "mean_all");
  if (rg) {
    nodes_[id].backward_fn = [n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        const double gv = s.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += gv;
      }
    };
  }
  return handle(id);
}

Tensor Graph::variance_all(Tensor a) {
  const std::size_t n = a.numel();
  double mean = 0.0;
  for (double v : a.values()) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : a.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const bool rg = a.requires_grad();
  int id = new_node({1}, {var}, rg, {a.id}, "variance_all");
  if (rg) {
    nodes_[id].backward_fn = [n, mean](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        const auto& x = g.node(s.parents[0]).values;
        const double c = 2.0 * s.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += c * (x[i] - mean);
      }
    };
  }
  return handle(id);
}

Tensor Graph::sum(Tensor a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const bool rg = a.requires_grad();
  int id = new_node({1}, {acc}, rg, {a.id}, "sum");
  if (rg) {
    nodes_[id].backward_fn = [](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        const double gv = s.grad[0];
        for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += gv;
      }
    };
  }
  return handle(id);
}

Tensor Graph::select(Tensor a, int flat_index) {
  require(flat_index >= 0 && static_cast<std::size_t>(flat_index) < a.numel(),
          "select: index out of range");
  const bool rg = a.requires_grad();
  int id = new_node({1}, {a.values()[flat_index]}, rg, {a.id}, "select");
  if (rg) {
    nodes_[id].backward_fn = [flat_index](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) (*ga)[flat_index] += s.grad[0];
    };
  }
  return handle(id);
}

Tensor Graph::log_softmax(Tensor a) {
  require(a.shape().size() == 1 || a.rows() == 1, "log_softmax: operand must be a vector");
  const std::size_t n = a.numel();
  const auto& v = a.values();
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double denom = 0.0;
  for (double x : v) denom += std::exp(x - mx);
  const double lse = mx + std::log(denom);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] - lse;
  const bool rg = a.requires_grad();
  int id = new_node(a.shape(), std::move(out), rg, {a.id}, "log_softmax");
  if (rg) {
    nodes_[id].backward_fn = [n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0])) {
        double gsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) gsum += s.grad[i];
        for (std::size_t i = 0; i < n; ++i)
          (*ga)[i] += s.grad[i] - std::exp(s.values[i]) * gsum;
      }
    };
  }
  return handle(id);
}

Tensor Graph::add_rowvec(Tensor x, Tensor b) {
  require(x.shape().size() == 2, "add_rowvec: x must be 2-D");
  require(b.numel() == static_cast<std::size_t>(x.cols()), "add_rowvec: width mismatch");
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = x.at(i, j) + b.values()[j];
  const bool rg = any_requires_grad({x.id, b.id});
  int id = new_node(x.shape(), std::move(out), rg, {x.id, b.id}, "add_rowvec");
  if (rg) {
    nodes_[id].backward_fn = [m, n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* gx = g.grad_sink(s.parents[0])) kernels::axpy(1.0, s.grad.data(), gx->data(), s.numel());
      if (auto* gb = g.grad_sink(s.parents[1])) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) (*gb)[j] += s.grad[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return handle(id);
}

Tensor Graph::rowwise_affine(Tensor x, Tensor gm, Tensor bt) {
  require(x.shape().size() == 2, "rowwise_affine: x must be 2-D");
  const int m = x.rows(), n = x.cols();
  require(gm.numel() == static_cast<std::size_t>(n) && bt.numel() == static_cast<std::size_t>(n),
          "rowwise_affine: width mismatch");
  std::vector<double> out(x.numel());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = x.at(i, j) * gm.values()[j] + bt.values()[j];
  const bool rg = any_requires_grad({x.id, gm.id, bt.id});
  int id = new_node(x.shape(), std::move(out), rg, {x.id, gm.id, bt.id}, "rowwise_affine");
  if (rg) {
    nodes_[id].backward_fn = [m, n](Graph& g, int self) {
      const Node& s = g.node(self);
      const auto& xv = g.node(s.parents[0]).values;
      const auto& gv = g.node(s.parents[1]).values;
      if (auto* gx = g.grad_sink(s.parents[0])) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * n + j;
            (*gx)[k] += s.grad[k] * gv[j];
          }
      }
      if (auto* gg = g.grad_sink(s.parents[1])) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * n + j;
            (*gg)[j] += s.grad[k] * xv[k];
          }
      }
      if (auto* gb = g.grad_sink(s.parents[2])) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) (*gb)[j] += s.grad[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return handle(id);
}

Tensor Graph::concat_rows(Tensor a, Tensor b) {
  require(a.shape().size() == 2 && b.shape().size() == 2, "concat_rows: operands must be 2-D");
  require(a.cols() == b.cols(), "concat_rows: width mismatch");
  const int ma = a.rows(), mb = b.rows(), n = a.cols();
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const bool rg = any_requires_grad({a.id, b.id});
  int id = new_node({ma + mb, n}, std::move(out), rg, {a.id, b.id}, "concat_rows");
  if (rg) {
    nodes_[id].backward_fn = [ma, mb, n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0]))
        kernels::axpy(1.0, s.grad.data(), ga->data(), static_cast<std::size_t>(ma) * n);
      if (auto* gb = g.grad_sink(s.parents[1]))
        kernels::axpy(1.0, s.grad.data() + static_cast<std::size_t>(ma) * n, gb->data(),
                      static_cast<std::size_t>(mb) * n);
    };
  }
  return handle(id);
}

Tensor Graph::take_row(Tensor a, int r) {
  require(a.shape().size() == 2, "take_row: operand must be 2-D");
  require(r >= 0 && r < a.rows(), "take_row: row out of range");
  const int n = a.cols();
  std::vector<double> out(a.values().begin() + static_cast<std::size_t>(r) * n,
                          a.values().begin() + static_cast<std::size_t>(r + 1) * n);
  const bool rg = a.requires_grad();
  int id = new_node({1, n}, std::move(out), rg, {a.id}, "take_row");
  if (rg) {
    nodes_[id].backward_fn = [r, n](Graph& g, int self) {
      const Node& s = g.node(self);
      if (auto* ga = g.grad_sink(s.parents[0]))
        kernels::axpy(1.0, s.grad.data(), ga->data() + static_cast<std::size_t>(r) * n, n);
    };
  }
  return handle(id);
}

void Graph::backward(Tensor root) {
  require(root.graph == this, "backward: root belongs to another graph");
  require(root.numel() == 1, "backward: root must be a scalar");
  for (Node& n : nodes_) {
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
    n.grad_seeded = false;
  }
  Node& r = nodes_[root.id];
  r.grad[0] = 1.0;
  r.grad_seeded = true;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad_seeded && n.backward_fn) n.backward_fn(*this, id);
  }
}

}  // namespace lrpx
