#include "jpt/head/classifier.hpp"

#include <cmath>

#include "jpt/embedding/entity.hpp"
#include "jpt/nn/mlp.hpp"
#include "jpt/util/error.hpp"

namespace jpt {

void init_head(ParamSet& params, const std::string& prefix, int d_p, Rng& rng) {
  params.add(prefix + ".W", random_normal(d_p, d_p, 1.0 / std::sqrt(d_p), rng));
  params.add(prefix + ".u", Matrix::Zero(1, d_p));
  params.add(prefix + ".c", Matrix::Zero(1, 1));
}

void LossConfig::validate() const {
  if (!(w_o > 0) || !(w_entity > 0)) throw UsageError("class weights must be positive");
  if (!(focal_pos_weight > 0) || !(focal_neg_weight > 0)) throw UsageError("focal weights must be positive");
  if (!(focal_gamma >= 0)) throw UsageError("focal gamma must be non-negative");
  if (!(mix_ce >= 0) || !(mix_focal >= 0)) throw UsageError("loss mixing coefficients must be non-negative");
}

nlohmann::json to_json(const LossConfig& c) {
  return {{"w_o", c.w_o},
          {"w_entity", c.w_entity},
          {"focal_gamma", c.focal_gamma},
          {"focal_pos_weight", c.focal_pos_weight},
          {"focal_neg_weight", c.focal_neg_weight},
          {"mix_ce", c.mix_ce},
          {"mix_focal", c.mix_focal}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig c;
  c.w_o = j.value("w_o", c.w_o);
  c.w_entity = j.value("w_entity", c.w_entity);
  c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
  c.focal_pos_weight = j.value("focal_pos_weight", c.focal_pos_weight);
  c.focal_neg_weight = j.value("focal_neg_weight", c.focal_neg_weight);
  c.mix_ce = j.value("mix_ce", c.mix_ce);
  c.mix_focal = j.value("mix_focal", c.mix_focal);
  c.validate();
  return c;
}

Matrix project_tokens(const Matrix& hidden, const ParamSet& params) {
  if (hidden.rows() == 0) throw DataError("empty input");
  if (!hidden.allFinite()) throw ModelError("hidden states contain non-finite values");
  return mlp_apply(params, kTokenMlpPrefix, hidden);
}

Matrix score(const Matrix& tokens, const Matrix& entities, const Matrix& w, const RowVector& bias) {
  if (tokens.cols() != w.rows() || entities.cols() != w.cols() || bias.size() != entities.rows()) {
    throw ModelError("score: shape mismatch (tokens " + std::to_string(tokens.cols()) + ", W " +
                     std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ", entities " +
                     std::to_string(entities.rows()) + "x" + std::to_string(entities.cols()) + ", bias " +
                     std::to_string(bias.size()) + ")");
  }
  Matrix s = (tokens * w) * entities.transpose();
  s.rowwise() += bias;
  return s;
}

RowVector head_bias(const Matrix& entities, const ParamSet& params, const std::string& prefix) {
  const Matrix& u = params.at(prefix + ".u");
  const double c = params.at(prefix + ".c")(0, 0);
  RowVector b = (u * entities.transpose()).row(0);
  b.array() += c;
  return b;
}

Matrix score(const Matrix& tokens, const Matrix& entities, const ParamSet& params, const std::string& prefix) {
  return score(tokens, entities, params.at(prefix + ".W"), head_bias(entities, params, prefix));
}

Matrix softmax_probs(const Matrix& scores) {
  Matrix p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    p.row(i) = (scores.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

void check_gold(const Matrix& scores, std::span<const int> gold) {
  if (static_cast<Eigen::Index>(gold.size()) != scores.rows()) {
    throw DataError("gold label count " + std::to_string(gold.size()) + " does not match " +
                    std::to_string(scores.rows()) + " scored tokens");
  }
  for (int y : gold) {
    if (y < 0 || y >= scores.cols()) {
      throw DataError("gold label " + std::to_string(y) + " outside 0.." + std::to_string(scores.cols() - 1));
    }
  }
}

}  // namespace

Matrix sigmoid_probs(const Matrix& scores) { return scores.unaryExpr([](double x) { return sigmoid(x); }); }

Matrix sigmoid_head_distribution(const Matrix& scores) {
  Matrix p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    double none = 1.0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      p(i, j) = sigmoid(scores(i, j));
      none *= sigmoid(-scores(i, j));
    }
    p(i, 0) = none;
  }
  return p;
}

TokenPredictions argmax_predictions(const Matrix& probs) {
  TokenPredictions out;
  out.probs = probs;
  out.labels.resize(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

TokenPredictions ensemble(const Matrix& softmax_p, const Matrix& sigmoid_p) {
  if (softmax_p.rows() != sigmoid_p.rows() || softmax_p.cols() != sigmoid_p.cols()) {
    throw ModelError("ensemble: head outputs have different shapes");
  }
  Matrix probs(softmax_p.rows(), softmax_p.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double sig_sum = sigmoid_p.row(i).sum();
    RowVector sig = sig_sum > 0 ? RowVector(sigmoid_p.row(i) / sig_sum)
                                : RowVector::Constant(probs.cols(), 1.0 / static_cast<double>(probs.cols()));
    probs.row(i) = (softmax_p.row(i) + sig) / 2.0;
    probs.row(i) /= probs.row(i).sum();
  }
  return argmax_predictions(probs);
}

LossValue loss_weighted_ce(const Matrix& scores, std::span<const int> gold, const LossConfig& cfg) {
  check_gold(scores, gold);
  LossValue out;
  out.grad = Matrix::Zero(scores.rows(), scores.cols());
  if (scores.rows() == 0) return out;
  const Matrix p = softmax_probs(scores);
  double weight_sum = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const int y = gold[static_cast<std::size_t>(i)];
    const double w = y == 0 ? cfg.w_o : cfg.w_entity;
    const double mx = scores.row(i).maxCoeff();
    const double lse = mx + std::log((scores.row(i).array() - mx).exp().sum());
    out.value += w * (lse - scores(i, y));
    out.grad.row(i) = w * p.row(i);
    out.grad(i, y) -= w;
    weight_sum += w;
  }
  out.value /= weight_sum;
  out.grad /= weight_sum;
  return out;
}

LossValue loss_focal(const Matrix& scores, std::span<const int> gold, const LossConfig& cfg) {
  check_gold(scores, gold);
  LossValue out;
  out.grad = Matrix::Zero(scores.rows(), scores.cols());
  const Eigen::Index classes = scores.cols() - 1;
  if (scores.rows() == 0 || classes == 0) return out;
  const double pairs = static_cast<double>(scores.rows() * classes);
  const double gamma = cfg.focal_gamma;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const int y = gold[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      const bool positive = y == j;
      const double alpha = positive ? cfg.focal_pos_weight : cfg.focal_neg_weight;
      const double z = positive ? scores(i, j) : -scores(i, j);
      const double q = sigmoid(z);
      const double one_minus_q = sigmoid(-z);
      const double log_q = log_sigmoid(z);
      const double mod = gamma == 0.0 ? 1.0 : std::pow(one_minus_q, gamma);
      out.value += -alpha * mod * log_q;
      const double dz = alpha * mod * (gamma * q * log_q - one_minus_q);
      out.grad(i, j) = (positive ? dz : -dz) / pairs;
    }
  }
  out.value /= pairs;
  return out;
}

double total_loss(double ce, double focal, const LossConfig& cfg) { return cfg.mix_ce * ce + cfg.mix_focal * focal; }

ad::Var score_graph(const Binding& binding, const std::string& prefix, ad::Var tokens, ad::Var entities) {
  ad::Graph& g = binding.graph();
  ad::Var bilinear = ad::matmul_nt(ad::matmul(tokens, binding[prefix + ".W"]), entities);
  ad::Var ones = g.constant(Matrix::Ones(1, entities.rows()));
  ad::Var bias = ad::add(ad::matmul_nt(binding[prefix + ".u"], entities), ad::matmul(binding[prefix + ".c"], ones));
  return ad::add_row(bilinear, bias);
}

ad::Var weighted_ce_graph(ad::Var scores, std::span<const int> gold, const LossConfig& cfg) {
  LossValue l = loss_weighted_ce(scores.value(), gold, cfg);
  return ad::scalar_from(scores, l.value, std::move(l.grad));
}

ad::Var focal_graph(ad::Var scores, std::span<const int> gold, const LossConfig& cfg) {
  LossValue l = loss_focal(scores.value(), gold, cfg);
  return ad::scalar_from(scores, l.value, std::move(l.grad));
}

ClassifierGraph classifier_forward(const Binding& binding, ad::Var hidden, ad::Var raw_entities) {
  ClassifierGraph out;
  out.tokens = mlp_forward(binding, mlp_dims(binding, kTokenMlpPrefix), kTokenMlpPrefix, hidden);
  out.entities = mlp_forward(binding, mlp_dims(binding, kEntityMlpPrefix), kEntityMlpPrefix, raw_entities);
  out.softmax_scores = score_graph(binding, kSoftmaxHead, out.tokens, out.entities);
  out.sigmoid_scores = score_graph(binding, kSigmoidHead, out.tokens, out.entities);
  return out;
}

}  // namespace jpt
