#pragma once

#include <string>
#include <vector>

#include "jpt/nn/params.hpp"

// Projection networks: every hidden layer is Linear -> LayerNorm -> GELU and
// the last layer is a plain Linear. dims = {d_in, hidden..., d_out}.
//
// Tensors under `prefix`:
//   <prefix>.l<k>.w         d_out x d_in
//   <prefix>.l<k>.b         1 x d_out
//   <prefix>.l<k>.ln.gamma  1 x d_out   (hidden layers only)
//   <prefix>.l<k>.ln.beta   1 x d_out
namespace jpt {

inline constexpr double kLayerNormEps = 1e-5;

void init_mlp(ParamSet& params, const std::string& prefix, const std::vector<int>& dims, Rng& rng);
// Single identity layer (d -> d) with zero bias.
void init_identity_mlp(ParamSet& params, const std::string& prefix, int d);

// Layer widths recovered from the stored tensors; throws ModelError when
// `prefix` has no layers.
std::vector<int> mlp_dims(const ParamSet& params, const std::string& prefix);
std::vector<int> mlp_dims(const Binding& binding, const std::string& prefix);

// Row-wise application. Throws ModelError when x.cols() != d_in.
ad::Var mlp_forward(const Binding& binding, const std::vector<int>& dims, const std::string& prefix, ad::Var x);
Matrix mlp_apply(const ParamSet& params, const std::string& prefix, const Matrix& x);

}  // namespace jpt
