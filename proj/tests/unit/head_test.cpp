#include <gtest/gtest.h>

#include <cmath>

#include "jpt/head/classifier.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

TEST(Loss, WeightedCeHandCase) {
  LossConfig cfg;
  Matrix s = Matrix::Zero(1, 2);
  std::vector<int> gold = {1};
  EXPECT_NEAR(loss_weighted_ce(s, gold, cfg).value, std::log(2.0), 1e-12);
  gold = {0};
  EXPECT_NEAR(loss_weighted_ce(s, gold, cfg).value, std::log(2.0), 1e-12);
}

TEST(Loss, WeightedCeWeightsOTokens) {
  LossConfig cfg;
  Matrix s(2, 3);
  s << 1.0, 0.0, -1.0, 0.5, 2.0, 0.0;
  std::vector<int> gold = {0, 1};
  auto nll = [&](int row, int y) {
    double z = 0;
    for (int j = 0; j < 3; ++j) z += std::exp(s(row, j));
    return std::log(z) - s(row, y);
  };
  const double expected = (0.25 * nll(0, 0) + 1.0 * nll(1, 1)) / 1.25;
  EXPECT_NEAR(loss_weighted_ce(s, gold, cfg).value, expected, 1e-12);
}

TEST(Loss, FocalHandCases) {
  LossConfig cfg;
  Matrix s = Matrix::Zero(1, 2);
  std::vector<int> positive = {1};
  const double expected = 5.0 * std::pow(0.5, 2.5) * std::log(2.0);
  EXPECT_NEAR(loss_focal(s, positive, cfg).value, expected, 1e-12);
  EXPECT_NEAR(expected, 0.6127, 5e-5);
  std::vector<int> negative = {0};
  EXPECT_NEAR(loss_focal(s, negative, cfg).value, std::pow(0.5, 2.5) * std::log(2.0), 1e-12);
}

TEST(Loss, FocalIgnoresTheOColumn) {
  LossConfig cfg;
  Matrix s(2, 3);
  s << 4.0, -1.0, 0.3, -2.0, 0.7, 1.1;
  std::vector<int> gold = {0, 2};
  LossValue a = loss_focal(s, gold, cfg);
  s(0, 0) = -9.0;
  s(1, 0) = 17.0;
  LossValue b = loss_focal(s, gold, cfg);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.grad.col(0).cwiseAbs().sum(), 0.0);
}

TEST(Loss, DefaultsAndValidation) {
  LossConfig cfg;
  EXPECT_EQ(cfg.w_o, 0.25);
  EXPECT_EQ(cfg.focal_gamma, 2.5);
  EXPECT_EQ(cfg.focal_pos_weight, 5.0);
  nlohmann::json j = to_json(cfg);
  EXPECT_EQ(j.at("w_o"), 0.25);
  EXPECT_EQ(loss_config_from_json(j).focal_gamma, 2.5);
  cfg.focal_gamma = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
  LossConfig zero;
  zero.w_o = 0;
  EXPECT_THROW(zero.validate(), UsageError);
}

TEST(Head, BilinearScoreWithSharedBias) {
  Matrix t(1, 2), p(2, 2), w(2, 2);
  t << 1, 2;
  p << 1, 0, 0, 1;
  w << 1, 0, 0, 3;
  RowVector b(2);
  b << 0.5, -0.5;
  Matrix s = score(t, p, w, b);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 5.5);

  ParamSet params;
  params.add("h.W", w);
  Matrix u(1, 2);
  u << 2, 3;
  params.add("h.u", u);
  params.add("h.c", Matrix::Constant(1, 1, 1.0));
  RowVector bias = head_bias(p, params, "h");
  EXPECT_DOUBLE_EQ(bias(0), 3.0);
  EXPECT_DOUBLE_EQ(bias(1), 4.0);
}

TEST(Head, SigmoidDistributionUsesProductRule) {
  Matrix s(1, 3);
  s << 100.0, 0.0, std::log(3.0);  // sigmoid = 0.5, 0.75
  Matrix d = sigmoid_head_distribution(s);
  EXPECT_NEAR(d(0, 0), 0.5 * 0.25, 1e-12);
  EXPECT_NEAR(d(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(d(0, 2), 0.75, 1e-12);
}

TEST(Head, EnsembleAveragesAndBreaksTiesLow) {
  Matrix soft(2, 3), sig(2, 3);
  soft << 0.2, 0.3, 0.5, 0.4, 0.4, 0.2;
  sig << 1.0, 1.0, 2.0, 2.0, 2.0, 0.0;  // rows normalize to .25,.25,.5 and .5,.5,0
  TokenPredictions p = ensemble(soft, sig);
  EXPECT_NEAR(p.probs(0, 2), 0.5, 1e-12);
  EXPECT_NEAR(p.probs(1, 0), 0.45, 1e-12);
  EXPECT_NEAR(p.probs.row(1).sum(), 1.0, 1e-12);
  EXPECT_EQ(p.labels, (std::vector<int>{2, 0}));
}

TEST(Head, SoftmaxRowsSumToOne) {
  Matrix s(2, 3);
  s << 1000, 0, -1000, 1, 2, 3;
  Matrix p = softmax_probs(s);
  EXPECT_NEAR(p.row(0).sum(), 1.0, 1e-12);
  EXPECT_NEAR(p(1, 2), std::exp(3) / (std::exp(1) + std::exp(2) + std::exp(3)), 1e-12);
  EXPECT_TRUE(p.allFinite());
}

}  // namespace
}  // namespace jpt
