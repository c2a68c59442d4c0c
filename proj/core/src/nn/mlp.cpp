#include "jpt/nn/mlp.hpp"

#include <cmath>

#include "jpt/util/error.hpp"

namespace jpt {

namespace {

std::string layer(const std::string& prefix, std::size_t k) { return prefix + ".l" + std::to_string(k); }

}  // namespace

void init_mlp(ParamSet& params, const std::string& prefix, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw UsageError("an MLP needs at least input and output widths");
  for (int d : dims) {
    if (d <= 0) throw UsageError("MLP widths must be positive");
  }
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k];
    const int out = dims[k + 1];
    const std::string l = layer(prefix, k);
    params.add(l + ".w", random_normal(out, in, std::sqrt(2.0 / (in + out)), rng));
    params.add(l + ".b", Matrix::Zero(1, out));
    if (k + 2 < dims.size()) {
      params.add(l + ".ln.gamma", Matrix::Ones(1, out));
      params.add(l + ".ln.beta", Matrix::Zero(1, out));
    }
  }
}

void init_identity_mlp(ParamSet& params, const std::string& prefix, int d) {
  params.add(layer(prefix, 0) + ".w", Matrix::Identity(d, d));
  params.add(layer(prefix, 0) + ".b", Matrix::Zero(1, d));
}

namespace {

template <typename Lookup>
std::vector<int> chain_dims(const std::string& prefix, Lookup lookup) {
  std::vector<int> dims;
  for (std::size_t k = 0;; ++k) {
    const std::string w = layer(prefix, k) + ".w";
    const Matrix* found = lookup(w);
    if (found == nullptr) break;
    const Matrix& m = *found;
    if (k == 0) {
      dims.push_back(static_cast<int>(m.cols()));
    } else if (m.cols() != dims.back()) {
      throw ModelError("layer " + w + " does not chain with the previous layer");
    }
    dims.push_back(static_cast<int>(m.rows()));
  }
  if (dims.empty()) throw ModelError("no MLP layers stored under '" + prefix + "'");
  return dims;
}

}  // namespace

std::vector<int> mlp_dims(const ParamSet& params, const std::string& prefix) {
  return chain_dims(prefix, [&](const std::string& n) { return params.contains(n) ? &params.at(n) : nullptr; });
}

std::vector<int> mlp_dims(const Binding& binding, const std::string& prefix) {
  return chain_dims(prefix,
                    [&](const std::string& n) { return binding.contains(n) ? &binding[n].value() : nullptr; });
}

ad::Var mlp_forward(const Binding& binding, const std::vector<int>& dims, const std::string& prefix, ad::Var x) {
  if (x.cols() != dims.front()) {
    throw ModelError(prefix + ": input width " + std::to_string(x.cols()) + " does not match configured " +
                     std::to_string(dims.front()));
  }
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::string l = layer(prefix, k);
    x = ad::add_row(ad::matmul_nt(x, binding[l + ".w"]), binding[l + ".b"]);
    if (k + 2 < dims.size()) {
      x = ad::gelu(ad::layer_norm(x, binding[l + ".ln.gamma"], binding[l + ".ln.beta"], kLayerNormEps));
    }
  }
  return x;
}

Matrix mlp_apply(const ParamSet& params, const std::string& prefix, const Matrix& x) {
  ad::Graph g;
  Binding b(g);
  b.bind(params, nullptr);
  return mlp_forward(b, mlp_dims(params, prefix), prefix, g.constant(x)).value();
}

}  // namespace jpt
