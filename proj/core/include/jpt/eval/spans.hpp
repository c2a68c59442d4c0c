#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/head/classifier.hpp"

namespace jpt {

struct EntitySpan {
  int start = 0;
  int end = 0;  // exclusive
  int type = 0;
  double score = 0.0;  // mean probability of `type` over the member tokens

  TokenSpan token_span() const { return {start, end, type}; }
};

// Maximal runs of one non-O label; O and type changes end a run.
std::vector<EntitySpan> merge_spans(const TokenPredictions& preds);
std::vector<EntitySpan> merge_spans(std::span<const int> labels);
std::vector<TokenSpan> to_token_spans(const std::vector<EntitySpan>& spans);
std::vector<int> spans_to_labels(const std::vector<TokenSpan>& spans, std::size_t num_tokens);

enum class AlignPolicy { kFirstSubword, kMajority };
AlignPolicy parse_align_policy(const std::string& name);

// Word-level predictions from piece-level ones; word_ids must be
// non-decreasing and start at 0. First-subword takes the first piece's label
// and probabilities; majority takes the most frequent label (lowest class on
// ties) and the mean probabilities.
TokenPredictions align_to_words(const TokenPredictions& preds, std::span<const int> word_ids,
                                AlignPolicy policy = AlignPolicy::kFirstSubword);
std::vector<int> align_to_words(std::span<const int> labels, std::span<const int> word_ids,
                                AlignPolicy policy = AlignPolicy::kFirstSubword);

struct Prf {
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  void finalize();  // ratios from the counts, 0/0 -> 0
};

enum class ErrorBucket { kExact, kTypeConfusion, kOverExtension, kTruncation, kPartialOverlap, kMissed, kSpurious };
inline constexpr std::size_t kNumErrorBuckets = 7;
const char* bucket_name(ErrorBucket b);

struct ErrorCase {
  ErrorBucket bucket = ErrorBucket::kExact;
  std::optional<TokenSpan> gold;
  std::optional<TokenSpan> pred;
};

// Matching passes, each over gold spans left to right pairing the first
// still-unmatched prediction: exact, same-bounds type confusion, same-type
// over-extension (pred strictly contains gold), same-type truncation (pred
// strictly inside gold), any remaining overlap; leftovers are missed (gold)
// or spurious (pred). Every span lands in exactly one case.
std::vector<ErrorCase> categorize_errors(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [gold][pred]
ConfusionMatrix confusion_matrix(std::span<const int> token_pred, std::span<const int> token_gold,
                                 std::size_t num_classes);

struct EvalReport {
  std::vector<std::string> class_names;  // index 0 is "O"
  Prf micro;
  std::vector<Prf> per_type;             // index k is class k + 1
  bool empty = false;                    // no gold and no predicted spans
  ConfusionMatrix confusion;
  std::array<std::size_t, kNumErrorBuckets> buckets{};
  std::size_t records = 0;
};

// Accumulates span and token statistics over many records.
class Evaluator {
 public:
  explicit Evaluator(std::vector<std::string> class_names);

  // Returns the error cases for this record. Token label vectors may be
  // empty to skip the confusion matrix.
  std::vector<ErrorCase> add(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold,
                             std::span<const int> token_pred = {}, std::span<const int> token_gold = {});
  EvalReport report() const;

 private:
  EvalReport acc_;
};

// Single-list evaluation. Greedy left-to-right exact matching; throws
// DataError when either list has overlapping spans.
EvalReport evaluate(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold, std::size_t num_types);

nlohmann::json report_to_json(const EvalReport& report);
std::string confusion_to_csv(const EvalReport& report);
// One JSON line with the bucket, spans and their surface text.
std::string error_case_to_jsonl(const ErrorCase& c, const std::string& record_id, const TokenizedText& text,
                                const std::vector<std::string>& class_names);

}  // namespace jpt
