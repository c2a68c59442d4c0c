#pragma once

#include <functional>
#include <span>
#include <vector>

#include "jpt/util/matrix.hpp"

// Minimal reverse-mode differentiation over dense matrices. One Graph is one
// forward pass; nodes are appended in evaluation order and backward() walks
// them in reverse. Parameters are bound by pointer, never copied, and their
// gradients are accumulated into caller-owned buffers.
namespace jpt::ad {

class Graph;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  // `value` must outlive the graph. With grad == nullptr the parameter is
  // treated as frozen and no gradient flows into it.
  Var parameter(const Matrix& value, Matrix* grad);

  // Appends an interior node. `fn` receives this graph and the new node id and
  // must push gradients into the parents via accumulate().
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);

  const Matrix& value(int id) const;
  const Matrix& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  void accumulate(int id, const Matrix& delta);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& delta) {
    Node& n = node(id);
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += delta;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Matrix* sink = nullptr;
    BackwardFn backward;
  };

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  static void ensure_grad(Node& n);

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return graph_->value(id_); }

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var x, Var row);  // row (1 x c) broadcast over the rows of x
Var scale(Var x, double factor);
Var gelu(Var x);              // exact erf form
Var layer_norm(Var x, Var gamma, Var beta, double eps);  // per row
// Row-wise softmax of factor * scores with a causal mask: row i only covers
// columns 0..i. Masked entries are exactly zero.
Var causal_softmax(Var scores, double factor);
Var gather_rows(Var x, std::span<const int> rows);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Scalar node whose value and gradient w.r.t. x are computed externally.
Var scalar_from(Var x, double value, Matrix dvalue_dx);

// Elementwise GELU and its derivative, shared with non-graph code paths.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace jpt::ad
