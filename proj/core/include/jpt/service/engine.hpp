#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/model/model.hpp"

namespace jpt {

struct PredictOptions {
  bool return_probs = false;
  bool return_attention = false;
};

struct PredictedSpan {
  int start = 0;  // unit indices, end exclusive
  int end = 0;
  std::size_t char_start = 0;  // byte offsets into the request text
  std::size_t char_end = 0;
  int type = 0;
  std::string type_name;
  std::string text;
  double score = 0.0;
};

struct StageTiming {
  std::int64_t render_us = 0;
  std::int64_t encode_us = 0;
  std::int64_t classify_us = 0;
  std::int64_t decode_us = 0;
  std::int64_t total_us = 0;
};

struct PredictResult {
  TokenizedText units;  // word-level units of the input
  std::vector<PredictedSpan> spans;
  TokenPredictions unit_predictions;
  // Second-pass pieces (rows) against first-pass pieces (columns).
  std::optional<Matrix> attention;
  std::vector<std::string> attention_labels;
  StageTiming timing;
};

struct EvalOutcome {
  EvalReport report;
  std::vector<std::string> error_lines;  // JSONL, one per non-exact case
  std::size_t ambiguous_tokens = 0;
  std::size_t ambiguous_correct = 0;
  Prf token_prf;  // over non-O unit labels

  double ambiguous_accuracy() const {
    return ambiguous_tokens > 0 ? static_cast<double>(ambiguous_correct) / static_cast<double>(ambiguous_tokens) : 0.0;
  }
};

// {"schema_id", "tokens", "labels", "spans", "probs"?}; shared by the CLI and
// the HTTP service.
nlohmann::json predict_to_json(const PredictResult& result, const EntitySchema& schema, bool include_probs);

// One forward pass per input; no generation loop exists anywhere on this path.
// Safe to call concurrently.
class Engine {
 public:
  // With encoder == nullptr the model's own toy backbone is used.
  Engine(std::shared_ptr<const Model> model, std::shared_ptr<const EmbeddingProvider> provider,
         std::shared_ptr<EmbeddingCache> cache, std::shared_ptr<const SequenceEncoder> encoder = nullptr);

  // (N+1) x d_enc definition embeddings; warms the cache.
  Matrix raw_entities(const EntitySchema& schema) const;

  PredictResult predict(const std::string& text, const EntitySchema& schema, const PredictOptions& options = {}) const;
  PredictResult predict_units(const TokenizedText& units, const EntitySchema& schema,
                              const PredictOptions& options = {}) const;
  // Splits the text into consecutive unit ranges that each fit the backbone;
  // spans never cross a chunk boundary. Offsets refer to the whole text.
  PredictResult predict_chunked(const std::string& text, const EntitySchema& schema,
                                const PredictOptions& options = {}) const;

  EvalOutcome evaluate(const Dataset& dataset) const;

  const Model& model() const { return *model_; }
  const EmbeddingCache& cache() const { return *cache_; }
  EmbeddingCache& cache() { return *cache_; }
  const EmbeddingProvider& provider() const { return *provider_; }

 private:
  std::size_t rendered_length(const TokenizedText& units, const EntitySchema& schema) const;

  std::shared_ptr<const Model> model_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::shared_ptr<const SequenceEncoder> encoder_;
};

}  // namespace jpt
