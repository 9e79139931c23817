#pragma once

#include <functional>
#include <string>
#include <vector>

namespace lrpx {

using Shape = std::vector<int>;

class Graph;

/// Handle into a Graph node. Cheap to copy; valid while the graph lives.
struct Tensor {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Shape& shape() const;
  const std::vector<double>& values() const;
  const std::vector<double>& grad() const;
  bool requires_grad() const;
  int rows() const;
  int cols() const;
  std::size_t numel() const;
  double scalar() const;
  double at(int r, int c) const;
};

/// Define-by-run computation graph over dense 64-bit tensors.
///
/// Nodes are appended in execution order, which is also a valid topological
/// order, so reverse-mode differentiation is a single reverse sweep. Each
/// graph is confined to one thread; independent graphs may run in parallel.
class Graph {
 public:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // same length as values, zero until backward
    bool requires_grad = false;
    bool grad_seeded = false;  // received any accumulation this backward pass
    std::vector<int> parents;
    std::function<void(Graph&, int)> backward_fn;
    const char* op = "";
    std::size_t numel() const { return values.size(); }
  };

  // -- leaves ---------------------------------------------------------------
  Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad);
  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar_leaf(double v, bool requires_grad = false);

  // -- primitive operations ---------------------------------------------------
  Tensor matmul(Tensor a, Tensor b);
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);  // elementwise
  Tensor scale(Tensor a, double s);
  Tensor transpose(Tensor a);
  Tensor softmax(Tensor a, int axis);
  Tensor layernorm_core(Tensor a, double eps, bool detach_scale);
  Tensor detach(Tensor a);
  Tensor identity(Tensor a);
  Tensor relu(Tensor a);
  Tensor gelu(Tensor a);
  Tensor embedding(Tensor table, const std::vector<int>& ids);
  Tensor mean_axis0(Tensor a);   // [N x d] -> [1 x d]
  Tensor mean_all(Tensor a);     // scalar
  Tensor variance_all(Tensor a); // scalar, uniform 1/N convention
  Tensor sum(Tensor a);          // scalar
  Tensor select(Tensor a, int flat_index);  // scalar pick
  Tensor log_softmax(Tensor a);  // flat vector (or single row)
  Tensor add_rowvec(Tensor x, Tensor b);              // [N x d] + [1 x d]
  Tensor rowwise_affine(Tensor x, Tensor g, Tensor b);  // x * g + b, row-broadcast
  Tensor concat_rows(Tensor a, Tensor b);
  Tensor take_row(Tensor a, int r);  // [N x d] -> [1 x d]

  /// Reverse sweep from a scalar root. Gradients of every reachable node are
  /// retained (readable via Tensor::grad) until the next backward call.
  void backward(Tensor root);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[id]; }
  Node& node(int id) { return nodes_[id]; }

 private:
  friend struct Tensor;

  int new_node(Shape shape, std::vector<double> values, bool requires_grad,
               std::vector<int> parents, const char* op);
  Tensor handle(int id) { return Tensor{this, id}; }

  // Returns the gradient buffer of `id` if gradients may flow into it,
  // marking the node seeded; nullptr otherwise.
  std::vector<double>* grad_sink(int id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return nullptr;
    n.grad_seeded = true;
    return &n.grad;
  }

  bool any_requires_grad(const std::vector<int>& ids) const;

  std::vector<Node> nodes_;
};

std::size_t shape_numel(const Shape& s);

}  // namespace lrpx
