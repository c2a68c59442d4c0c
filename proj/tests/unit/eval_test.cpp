#include <gtest/gtest.h>

#include <map>

#include "jpt/eval/spans.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {
namespace {

// Run-length oracle written independently of merge_spans.
std::vector<TokenSpan> run_length_oracle(const std::vector<int>& labels) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (labels[i] != 0) out.push_back({static_cast<int>(i), static_cast<int>(j), labels[i]});
    i = j;
  }
  return out;
}

TEST(MergeSpans, MatchesOracleOnAllLength6Sequences) {
  int count = 0;
  for (int code = 0; code < 729; ++code) {
    std::vector<int> labels(6);
    int c = code;
    for (int& l : labels) {
      l = c % 3;
      c /= 3;
    }
    EXPECT_EQ(to_token_spans(merge_spans(labels)), run_length_oracle(labels)) << code;
    EXPECT_EQ(spans_to_labels(run_length_oracle(labels), 6), labels);
    ++count;
  }
  EXPECT_EQ(count, 729);
}

TEST(MergeSpans, ScoreIsMeanProbability) {
  TokenPredictions p;
  p.labels = {1, 1, 0};
  p.probs = Matrix(3, 2);
  p.probs << 0.2, 0.8, 0.4, 0.6, 0.9, 0.1;
  auto spans = merge_spans(p);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_DOUBLE_EQ(spans[0].score, 0.7);
}

TEST(Evaluate, HandCases) {
  EvalReport r = evaluate({{0, 1, 1}}, {{0, 1, 1}, {3, 5, 2}}, 2);
  EXPECT_EQ(r.micro.precision, 1.0);
  EXPECT_EQ(r.micro.recall, 0.5);
  EXPECT_EQ(r.micro.f1, 2.0 / 3.0);
  EXPECT_EQ(r.per_type[0].f1, 1.0);
  EXPECT_EQ(r.per_type[1].recall, 0.0);

  EvalReport wrong_type = evaluate({{0, 1, 2}}, {{0, 1, 1}}, 2);
  EXPECT_EQ(wrong_type.micro.tp, 0u);
  EXPECT_EQ(wrong_type.micro.f1, 0.0);

  EvalReport half = evaluate({{0, 1, 1}, {2, 3, 1}}, {{0, 1, 1}, {4, 5, 1}}, 1);
  EXPECT_EQ(half.micro.precision, 0.5);
  EXPECT_EQ(half.micro.recall, 0.5);
  EXPECT_EQ(half.micro.f1, 0.5);

  EvalReport none = evaluate({}, {}, 1);
  EXPECT_TRUE(none.empty);
  EXPECT_EQ(none.micro.f1, 0.0);

  EXPECT_THROW(evaluate({{0, 3, 1}, {2, 4, 1}}, {}, 1), DataError);
}

TEST(Evaluate, BucketsNameEachCase) {
  auto only = [](const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold) {
    auto cases = categorize_errors(pred, gold);
    EXPECT_EQ(cases.size(), 1u);
    return cases.empty() ? ErrorBucket::kExact : cases[0].bucket;
  };
  EXPECT_EQ(only({{1, 3, 1}}, {{1, 3, 1}}), ErrorBucket::kExact);
  EXPECT_EQ(only({{1, 3, 2}}, {{1, 3, 1}}), ErrorBucket::kTypeConfusion);
  EXPECT_EQ(only({{0, 3, 1}}, {{1, 3, 1}}), ErrorBucket::kOverExtension);
  EXPECT_EQ(only({{1, 2, 1}}, {{1, 3, 1}}), ErrorBucket::kTruncation);
  EXPECT_EQ(only({{2, 5, 1}}, {{1, 3, 1}}), ErrorBucket::kPartialOverlap);
  EXPECT_EQ(only({}, {{1, 3, 1}}), ErrorBucket::kMissed);
  EXPECT_EQ(only({{1, 3, 1}}, {}), ErrorBucket::kSpurious);
}

std::vector<TokenSpan> random_spans(Rng& rng, int n, int types) {
  std::vector<TokenSpan> out;
  int pos = 0;
  while (true) {
    pos += static_cast<int>(rng.below(3));
    const int len = 1 + static_cast<int>(rng.below(3));
    if (pos + len > n) break;
    out.push_back({pos, pos + len, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(types)))});
    pos += len;
  }
  return out;
}

TEST(Evaluate, BucketsPartitionSpansOnRandomInstances) {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    auto pred = random_spans(rng, 15, 3);
    auto gold = random_spans(rng, 15, 3);
    std::map<std::size_t, int> pred_seen, gold_seen;
    for (const ErrorCase& c : categorize_errors(pred, gold)) {
      ASSERT_TRUE(c.pred || c.gold);
      if (c.pred) {
        auto it = std::find(pred.begin(), pred.end(), *c.pred);
        ASSERT_NE(it, pred.end());
        ++pred_seen[static_cast<std::size_t>(it - pred.begin())];
      }
      if (c.gold) {
        auto it = std::find(gold.begin(), gold.end(), *c.gold);
        ASSERT_NE(it, gold.end());
        ++gold_seen[static_cast<std::size_t>(it - gold.begin())];
      }
      if (c.bucket == ErrorBucket::kExact) { EXPECT_EQ(*c.pred, *c.gold); }
      if (c.bucket == ErrorBucket::kMissed) { EXPECT_FALSE(c.pred); }
      if (c.bucket == ErrorBucket::kSpurious) { EXPECT_FALSE(c.gold); }
    }
    ASSERT_EQ(pred_seen.size(), pred.size()) << trial;
    ASSERT_EQ(gold_seen.size(), gold.size()) << trial;
    for (auto [k, v] : pred_seen) EXPECT_EQ(v, 1);
    for (auto [k, v] : gold_seen) EXPECT_EQ(v, 1);
  }
}

TEST(Align, FirstSubwordAndMajority) {
  std::vector<int> labels = {1, 2, 2, 0, 1};
  std::vector<int> words = {0, 0, 0, 1, 2};
  EXPECT_EQ(align_to_words(labels, words), (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(align_to_words(labels, words, AlignPolicy::kMajority), (std::vector<int>{2, 0, 1}));
  std::vector<int> tie = {2, 1};
  std::vector<int> one_word = {0, 0};
  EXPECT_EQ(align_to_words(tie, one_word, AlignPolicy::kMajority), (std::vector<int>{1}));
  EXPECT_EQ(parse_align_policy("majority"), AlignPolicy::kMajority);
}

TEST(Evaluator, AccumulatesAndConfuses) {
  Evaluator ev({"O", "PER", "LOC"});
  std::vector<int> tp = {1, 0, 2}, tg = {1, 0, 1};
  ev.add({{0, 1, 1}, {2, 3, 2}}, {{0, 1, 1}, {2, 3, 1}}, tp, tg);
  ev.add({}, {{0, 2, 2}});
  EvalReport r = ev.report();
  EXPECT_EQ(r.records, 2u);
  EXPECT_EQ(r.micro.tp, 1u);
  EXPECT_EQ(r.micro.predicted, 2u);
  EXPECT_EQ(r.micro.gold, 3u);
  EXPECT_EQ(r.confusion[1][2], 1u);
  EXPECT_EQ(r.confusion[1][1], 1u);
  EXPECT_EQ(r.buckets[static_cast<std::size_t>(ErrorBucket::kTypeConfusion)], 1u);
  EXPECT_EQ(r.buckets[static_cast<std::size_t>(ErrorBucket::kMissed)], 1u);
  nlohmann::json j = report_to_json(r);
  EXPECT_EQ(j.at("micro").at("tp"), 1);
  EXPECT_NE(confusion_to_csv(r).find("PER"), std::string::npos);
}

}  // namespace
}  // namespace jpt
