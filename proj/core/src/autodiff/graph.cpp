#include "jpt/autodiff/graph.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "jpt/util/error.hpp"

namespace jpt::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ModelError(std::string("autodiff shape error: ") + what);
}

std::vector<int> ids_of(std::span<const Var> vars) {
  std::vector<int> ids;
  ids.reserve(vars.size());
  for (const Var& v : vars) ids.push_back(v.id());
  return ids;
}

}  // namespace

void Graph::ensure_grad(Node& n) {
  if (!n.has_grad) {
    const Matrix& v = n.external ? *n.external : n.owned;
    n.grad = Matrix::Zero(v.rows(), v.cols());
    n.has_grad = true;
  }
}

Var Graph::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::parameter(const Matrix& value, Matrix* grad) {
  Node n;
  n.external = &value;
  n.sink = grad;
  n.requires_grad = grad != nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  for (const Var& p : parents) {
    require(p.graph_ == this, "parent belongs to another graph");
    n.requires_grad = n.requires_grad || requires_grad(p.id());
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.owned;
}

const Matrix& Graph::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    static const Matrix kEmpty;
    return kEmpty;
  }
  return n.grad;
}

void Graph::accumulate(int id, const Matrix& delta) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  ensure_grad(n);
  n.grad += delta;
}

void Graph::backward(Var loss) {
  require(loss.graph_ == this, "loss belongs to another graph");
  const Matrix& lv = value(loss.id());
  require(lv.rows() == 1 && lv.cols() == 1, "backward() needs a scalar");
  if (!requires_grad(loss.id())) return;
  Node& root = node(loss.id());
  ensure_grad(root);
  root.grad(0, 0) += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = node(id);
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.sink) *n.sink += n.grad;
  }
}

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.graph().record(std::move(out), parents, [ia, ib](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    if (g.requires_grad(ia)) g.accumulate(ia, up * g.value(ib).transpose());
    if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * up);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt");
  Matrix out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.graph().record(std::move(out), parents, [ia, ib](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    if (g.requires_grad(ia)) g.accumulate(ia, up * g.value(ib));
    if (g.requires_grad(ib)) g.accumulate(ib, up.transpose() * g.value(ia));
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix out = a.value() + b.value();
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.graph().record(std::move(out), parents, [ia, ib](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ia, up);
    g.accumulate(ib, up);
  });
}

Var add_row(Var x, Var row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row");
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  const int ix = x.id(), ir = row.id();
  const Var parents[] = {x, row};
  return x.graph().record(std::move(out), parents, [ix, ir](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    g.accumulate(ix, up);
    if (g.requires_grad(ir)) g.accumulate(ir, up.colwise().sum());
  });
}

Var scale(Var x, double factor) {
  Matrix out = x.value() * factor;
  const int ix = x.id();
  const Var parents[] = {x};
  return x.graph().record(std::move(out), parents, [ix, factor](Graph& g, int self) {
    g.accumulate_expr(ix, g.grad(self) * factor);
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Var gelu(Var x) {
  Matrix out = x.value().unaryExpr([](double v) { return gelu_value(v); });
  const int ix = x.id();
  const Var parents[] = {x};
  return x.graph().record(std::move(out), parents, [ix](Graph& g, int self) {
    Matrix d = g.value(ix).unaryExpr([](double v) { return gelu_derivative(v); });
    g.accumulate(ix, g.grad(self).cwiseProduct(d));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == cols, "layer_norm gamma");
  require(beta.rows() == 1 && beta.cols() == cols, "layer_norm beta");
  const Matrix& xv = x.value();
  Matrix xhat(rows, cols);
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    xhat.row(r) = (xv.row(r).array() - mean) * is;
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ix = x.id(), igm = gamma.id(), ib = beta.id();
  const Var parents[] = {x, gamma, beta};
  return x.graph().record(
      std::move(out), parents,
      [ix, igm, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, int self) {
        const Matrix& up = g.grad(self);
        if (g.requires_grad(igm)) g.accumulate(igm, up.cwiseProduct(xhat).colwise().sum());
        if (g.requires_grad(ib)) g.accumulate(ib, up.colwise().sum());
        if (g.requires_grad(ix)) {
          Matrix dxhat = up;
          dxhat.array().rowwise() *= g.value(igm).row(0).array();
          Matrix dx(up.rows(), up.cols());
          const double n = static_cast<double>(up.cols());
          for (Eigen::Index r = 0; r < up.rows(); ++r) {
            const double m1 = dxhat.row(r).sum() / n;
            const double m2 = dxhat.row(r).dot(xhat.row(r)) / n;
            dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) *
                        inv_std[static_cast<std::size_t>(r)];
          }
          g.accumulate(ix, dx);
        }
      });
}

Var causal_softmax(Var scores, double factor) {
  const Eigen::Index rows = scores.rows();
  require(scores.cols() >= rows, "causal_softmax needs cols >= rows");
  const Matrix& s = scores.value();
  Matrix p = Matrix::Zero(rows, scores.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index width = scores.cols() - rows + i + 1;
    double mx = factor * s(i, 0);
    for (Eigen::Index j = 1; j < width; ++j) mx = std::max(mx, factor * s(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < width; ++j) {
      const double e = std::exp(factor * s(i, j) - mx);
      p(i, j) = e;
      sum += e;
    }
    for (Eigen::Index j = 0; j < width; ++j) p(i, j) /= sum;
  }
  const int is = scores.id();
  const Var parents[] = {scores};
  return scores.graph().record(std::move(p), parents, [is, factor](Graph& g, int self) {
    const Matrix& up = g.grad(self);
    const Matrix& pv = g.value(self);
    Matrix ds = Matrix::Zero(pv.rows(), pv.cols());
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      const double dot = pv.row(i).dot(up.row(i));
      ds.row(i) = factor * pv.row(i).array() * (up.row(i).array() - dot);
    }
    g.accumulate(is, ds);
  });
}

Var gather_rows(Var x, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  const Matrix& xv = x.value();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] >= 0 && rows[r] < xv.rows(), "gather_rows index");
    out.row(static_cast<Eigen::Index>(r)) = xv.row(rows[r]);
  }
  const int ix = x.id();
  std::vector<int> idx(rows.begin(), rows.end());
  const Var parents[] = {x};
  return x.graph().record(std::move(out), parents, [ix, idx = std::move(idx)](Graph& g, int self) {
    if (!g.requires_grad(ix)) return;
    const Matrix& up = g.grad(self);
    Matrix dx = Matrix::Zero(g.value(ix).rows(), g.value(ix).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) dx.row(idx[r]) += up.row(static_cast<Eigen::Index>(r));
    g.accumulate(ix, dx);
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols");
  Matrix out = x.value().middleCols(start, count);
  const int ix = x.id();
  const Var parents[] = {x};
  return x.graph().record(std::move(out), parents, [ix, start, count](Graph& g, int self) {
    if (!g.requires_grad(ix)) return;
    Matrix dx = Matrix::Zero(g.value(ix).rows(), g.value(ix).cols());
    dx.middleCols(start, count) = g.grad(self);
    g.accumulate(ix, dx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.rows() == parts[0].rows(), "concat_cols rows");
    total += p.cols();
  }
  Matrix out(parts[0].rows(), total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<int> ids = ids_of(parts);
  return parts[0].graph().record(
      std::move(out), parts, [ids = std::move(ids), offsets = std::move(offsets)](Graph& g, int self) {
        const Matrix& up = g.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (g.requires_grad(ids[k])) g.accumulate(ids[k], up.middleCols(offsets[k], g.value(ids[k]).cols()));
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.cols() == parts[0].cols(), "concat_rows cols");
    total += p.rows();
  }
  Matrix out(total, parts[0].cols());
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  std::vector<int> ids = ids_of(parts);
  return parts[0].graph().record(
      std::move(out), parts, [ids = std::move(ids), offsets = std::move(offsets)](Graph& g, int self) {
        const Matrix& up = g.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (g.requires_grad(ids[k])) g.accumulate(ids[k], up.middleRows(offsets[k], g.value(ids[k]).rows()));
        }
      });
}

Var scalar_from(Var x, double value, Matrix dvalue_dx) {
  require(dvalue_dx.rows() == x.rows() && dvalue_dx.cols() == x.cols(), "scalar_from gradient shape");
  Matrix out(1, 1);
  out(0, 0) = value;
  const int ix = x.id();
  const Var parents[] = {x};
  return x.graph().record(std::move(out), parents, [ix, d = std::move(dvalue_dx)](Graph& g, int self) {
    g.accumulate_expr(ix, d * g.grad(self)(0, 0));
  });
}

}  // namespace jpt::ad
