#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jpt/data/schema.hpp"
#include "jpt/data/tokenizer.hpp"

namespace jpt {

// Half-open token range with a class index in 1..N.
struct TokenSpan {
  int start = 0;
  int end = 0;
  int type = 0;
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

enum class BioTag { kOutside, kBegin, kInside };

struct BioLabel {
  BioTag tag = BioTag::kOutside;
  int type = 0;  // 0 iff tag == kOutside
  bool operator==(const BioLabel&) const = default;
};

// Flat gold spans, sorted by start.
struct GoldAnnotation {
  std::vector<TokenSpan> spans;

  std::vector<BioLabel> bio_labels(std::size_t num_tokens) const;
  // Per-token class index (0 = O). Adjacent same-type spans are
  // indistinguishable in this view; use bio_labels() when that matters.
  std::vector<int> class_labels(std::size_t num_tokens) const;
  static GoldAnnotation from_bio(const std::vector<BioLabel>& labels);
};

// Throws DataError unless spans are sorted, non-overlapping, inside
// [0, num_tokens), non-empty and typed 1..num_types.
void validate_spans(const std::vector<TokenSpan>& spans, std::size_t num_tokens, std::size_t num_types);

struct DatasetRecord {
  std::string id;
  TokenizedText text;
  std::size_t schema_index = 0;
  GoldAnnotation gold;
  // Per-token marker for tokens whose type depends on context only; empty
  // when the source carries no markers.
  std::vector<bool> ambiguous;
  // CoNLL passthrough: bytes between the token and the tag on each line.
  std::vector<std::string> conll_middle;
};

struct Dataset {
  std::vector<EntitySchema> schemas;
  std::vector<DatasetRecord> records;
  std::size_t repairs = 0;  // orphan I- tags rewritten to B-

  const EntitySchema& schema_of(const DatasetRecord& r) const { return schemas.at(r.schema_index); }
  // Returns the index of an equal schema, appending it when new.
  std::size_t intern_schema(const EntitySchema& schema);
};

// CoNLL-2003 column format: one token per line, the last whitespace-separated
// column is the BIO tag, blank lines separate sentences. Types are indexed in
// order of first appearance; definitions default to the type name.
Dataset read_conll(const std::string& path);
Dataset parse_conll(const std::string& content, const std::string& source_name = "<memory>");
// Each sentence is followed by one blank line.
std::string format_conll(const Dataset& dataset);
void write_conll(const Dataset& dataset, const std::string& path);

// One JSON object per line:
//   {"text": str, "entity_types": [{"name","definition"}], "o_definition"?: str,
//    "spans": [{"start","end","type"}], "id"?: str, "ambiguous"?: [token idx]}
// Character offsets are bytes into text; spans must align with token
// boundaries of the reference pre-tokenizer.
Dataset read_jsonl(const std::string& path);
Dataset parse_jsonl(const std::string& content, const std::string& source_name = "<memory>");
std::string format_jsonl(const Dataset& dataset);

// Dispatches on extension: .jsonl/.json -> JSONL, anything else -> CoNLL.
Dataset read_dataset(const std::string& path);

// Replaces every schema's definitions with those of `schema`, matching type
// names case-insensitively. Types missing from `schema` raise DataError.
void apply_schema_definitions(Dataset& dataset, const EntitySchema& schema);

}  // namespace jpt
