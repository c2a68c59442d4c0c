#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "jpt/autodiff/graph.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {
namespace {

using ad::Graph;
using ad::Var;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// loss = sum(f(inputs) .* weights) with the weights drawn once per check.
using Builder = std::function<Var(Graph&, std::vector<Var>&)>;

double loss_of(const Builder& build, const std::vector<Matrix>& inputs, const Matrix& weights,
               std::vector<Matrix>* grads) {
  Graph g;
  std::vector<Var> vars;
  if (grads) grads->clear();
  if (grads) grads->reserve(inputs.size());
  for (const Matrix& m : inputs) {
    if (grads) {
      grads->push_back(Matrix::Zero(m.rows(), m.cols()));
      vars.push_back(g.parameter(m, &grads->back()));
    } else {
      vars.push_back(g.parameter(m, nullptr));
    }
  }
  Var out = build(g, vars);
  const double value = out.value().cwiseProduct(weights).sum();
  Var loss = ad::scalar_from(out, value, weights);
  if (grads) g.backward(loss);
  return value;
}

void check_gradient(const Builder& build, std::vector<Matrix> inputs, std::uint64_t seed = 3) {
  Rng rng(seed);
  Matrix weights;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Matrix& m : inputs) vars.push_back(g.constant(m));
    Var out = build(g, vars);
    weights = random_matrix(out.rows(), out.cols(), rng);
  }
  std::vector<Matrix> grads;
  loss_of(build, inputs, weights, &grads);
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k].data()[i];
      inputs[k].data()[i] = saved + h;
      const double up = loss_of(build, inputs, weights, nullptr);
      inputs[k].data()[i] = saved - h;
      const double down = loss_of(build, inputs, weights, nullptr);
      inputs[k].data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[k].data()[i];
      EXPECT_NEAR(analytic, numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << "input " << k << " coord " << i;
    }
  }
}

TEST(Autodiff, MatmulFamily) {
  Rng rng(1);
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::matmul(v[0], v[1]); },
                 {random_matrix(3, 4, rng), random_matrix(4, 2, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::matmul_nt(v[0], v[1]); },
                 {random_matrix(3, 4, rng), random_matrix(5, 4, rng)});
}

TEST(Autodiff, ElementwiseAndBroadcast) {
  Rng rng(2);
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::add(v[0], v[1]); },
                 {random_matrix(3, 4, rng), random_matrix(3, 4, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::add_row(v[0], v[1]); },
                 {random_matrix(3, 4, rng), random_matrix(1, 4, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::scale(v[0], -1.7); }, {random_matrix(2, 3, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::gelu(v[0]); }, {random_matrix(3, 5, rng)});
}

TEST(Autodiff, LayerNormAndSoftmax) {
  Rng rng(3);
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::layer_norm(v[0], v[1], v[2], 1e-5); },
                 {random_matrix(4, 6, rng), random_matrix(1, 6, rng), random_matrix(1, 6, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::causal_softmax(v[0], 0.5); },
                 {random_matrix(5, 5, rng)});
}

TEST(Autodiff, StructuralOps) {
  Rng rng(4);
  const std::vector<int> rows = {2, 0, 2};
  check_gradient([&](Graph&, std::vector<Var>& v) { return ad::gather_rows(v[0], rows); },
                 {random_matrix(3, 4, rng)});
  check_gradient([](Graph&, std::vector<Var>& v) { return ad::slice_cols(v[0], 1, 2); }, {random_matrix(3, 4, rng)});
  check_gradient(
      [](Graph&, std::vector<Var>& v) {
        std::vector<Var> parts = {v[0], v[1]};
        return ad::concat_cols(parts);
      },
      {random_matrix(3, 2, rng), random_matrix(3, 1, rng)});
  check_gradient(
      [](Graph&, std::vector<Var>& v) {
        std::vector<Var> parts = {v[0], v[1]};
        return ad::concat_rows(parts);
      },
      {random_matrix(1, 3, rng), random_matrix(2, 3, rng)});
}

TEST(Autodiff, CausalSoftmaxMasksExactly) {
  Rng rng(5);
  Graph g;
  Var s = g.constant(random_matrix(4, 4, rng));
  Matrix p = ad::causal_softmax(s, 1.0).value();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    for (int j = i + 1; j < 4; ++j) EXPECT_EQ(p(i, j), 0.0);
  }
}

TEST(Autodiff, FrozenParametersGetNoGradient) {
  Rng rng(6);
  Matrix a = random_matrix(2, 2, rng);
  Matrix b = random_matrix(2, 2, rng);
  Matrix ga = Matrix::Zero(2, 2);
  Graph g;
  Var va = g.parameter(a, &ga);
  Var vb = g.parameter(b, nullptr);
  Var out = ad::matmul(va, vb);
  g.backward(ad::scalar_from(out, out.value().sum(), Matrix::Ones(2, 2)));
  EXPECT_FALSE(g.requires_grad(vb.id()));
  EXPECT_GT(ga.norm(), 0.0);
}

TEST(Autodiff, GeluMatchesErfForm) {
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    EXPECT_NEAR(ad::gelu_value(x), 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))), 1e-15);
    const double h = 1e-6;
    EXPECT_NEAR(ad::gelu_derivative(x), (ad::gelu_value(x + h) - ad::gelu_value(x - h)) / (2 * h), 1e-8);
  }
}

}  // namespace
}  // namespace jpt
