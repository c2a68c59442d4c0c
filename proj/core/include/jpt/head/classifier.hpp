#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/nn/params.hpp"

namespace jpt {

inline constexpr const char* kTokenMlpPrefix = "token_mlp";
inline constexpr const char* kSoftmaxHead = "head.softmax";
inline constexpr const char* kSigmoidHead = "head.sigmoid";

// Bilinear head tensors under <prefix>: W (d_p x d_p), u (1 x d_p), c (1 x 1).
// The per-class bias is b_j = u . p_j + c, so a schema of any size gets
// biases without per-type parameters.
void init_head(ParamSet& params, const std::string& prefix, int d_p, Rng& rng);

struct LossConfig {
  double w_o = 0.25;
  double w_entity = 1.0;
  double focal_gamma = 2.5;
  double focal_pos_weight = 5.0;
  double focal_neg_weight = 1.0;
  double mix_ce = 1.0;
  double mix_focal = 1.0;

  // Throws UsageError unless weights > 0 and gamma >= 0.
  void validate() const;
};

nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);

struct TokenPredictions {
  std::vector<int> labels;  // class index per token
  Matrix probs;             // n x (N+1)
};

Matrix project_tokens(const Matrix& hidden, const ParamSet& params);

// s[i][j] = t_i . W p_j + b_j.
Matrix score(const Matrix& tokens, const Matrix& entities, const Matrix& w, const RowVector& bias);
RowVector head_bias(const Matrix& entities, const ParamSet& params, const std::string& prefix);
Matrix score(const Matrix& tokens, const Matrix& entities, const ParamSet& params, const std::string& prefix);

Matrix softmax_probs(const Matrix& scores);
Matrix sigmoid_probs(const Matrix& scores);
// The sigmoid head decides each entity type independently, so its O
// probability is taken as prod_j (1 - sigmoid(s_j)) over entity columns; the
// head's own O-column score is unused.
Matrix sigmoid_head_distribution(const Matrix& scores);

// probs = (softmax_p + row-normalized sigmoid_p) / 2, row-normalized again;
// labels by argmax with the lowest index winning ties.
TokenPredictions ensemble(const Matrix& softmax_p, const Matrix& sigmoid_p);
TokenPredictions argmax_predictions(const Matrix& probs);

struct LossValue {
  double value = 0.0;
  Matrix grad;  // d value / d scores
};

// Class-weighted mean of -log softmax, normalized by the applied weights.
LossValue loss_weighted_ce(const Matrix& scores, std::span<const int> gold, const LossConfig& cfg);
// One-vs-rest focal loss over entity columns 1..N (O tokens are all-negative),
// averaged over token-class pairs. Column 0 receives zero gradient.
LossValue loss_focal(const Matrix& scores, std::span<const int> gold, const LossConfig& cfg);
double total_loss(double ce, double focal, const LossConfig& cfg);

// Graph versions for training.
ad::Var score_graph(const Binding& binding, const std::string& prefix, ad::Var tokens, ad::Var entities);
ad::Var weighted_ce_graph(ad::Var scores, std::span<const int> gold, const LossConfig& cfg);
ad::Var focal_graph(ad::Var scores, std::span<const int> gold, const LossConfig& cfg);

struct ClassifierGraph {
  ad::Var tokens;    // n x d_p
  ad::Var entities;  // (N+1) x d_p
  ad::Var softmax_scores;
  ad::Var sigmoid_scores;
};

// Token MLP, entity MLP and both bilinear heads over already extracted
// second-pass states and raw definition embeddings.
ClassifierGraph classifier_forward(const Binding& binding, ad::Var hidden, ad::Var raw_entities);

}  // namespace jpt
