#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/encoder/prompt.hpp"

namespace jpt {

// Token economics only: cost = prefill * c_in + output * c_out.
struct CostModel {
  double c_in = 1.0;
  double c_out = 4.0;

  // Throws UsageError unless c_in > 0 and c_out >= c_in.
  void validate() const;
};

// Per-sample averages of a workload, in backbone tokens.
struct WorkloadStats {
  std::string name;
  double mean_input_tokens = 0.0;  // n
  double mean_entities = 0.0;      // gold mentions per sample
  double num_types = 0.0;          // N
  double mention_tokens = 0.0;     // tokens per gold mention
  double type_name_tokens = 0.0;   // tokens per type name
  double definition_tokens = 0.0;  // tokens per "name: definition" schema line
  double tokens_per_word = 1.0;    // used to scale word counts
  std::size_t samples = 0;
};

nlohmann::json to_json(const WorkloadStats& s);
WorkloadStats workload_stats_from_json(const nlohmann::json& j);

// Measures a dataset; word counts are scaled by tokens_per_word.
WorkloadStats measure_workload(const Dataset& data, double tokens_per_word, const std::string& name);

enum class SchemaText { kNone, kNames, kDefinitions };

// Token accounting of one extraction method. With per_type_queries the whole
// request is repeated once per entity type, each carrying one type's schema
// text, and gold mentions are spread evenly over the queries.
struct WorkloadDescriptor {
  std::string method;
  bool generative = true;
  double input_copies = 1.0;
  double extra_input = 0.0;  // fixed extra prefill tokens (separators)
  double prompt_base = 0.0;  // instruction/framing tokens per query
  SchemaText schema = SchemaText::kNames;
  bool per_type_queries = false;
  double output_base = 0.0;
  double output_per_query = 0.0;
  double output_per_entity = 0.0;  // format tokens on top of the mention
  bool output_type_names = false;  // each mention is followed by its type name
  double output_per_input_token = 0.0;
};

nlohmann::json to_json(const WorkloadDescriptor& d);
WorkloadDescriptor workload_descriptor_from_json(const nlohmann::json& j);

struct TokenCounts {
  double prefill = 0.0;
  double output = 0.0;
};

TokenCounts token_counts(const WorkloadDescriptor& d, const WorkloadStats& s);
double cost(const CostModel& m, const TokenCounts& t);

// Words of fixed framing text in a template (system, acknowledgement and
// template literals; placeholders excluded).
std::size_t template_framing_words(const PromptTemplate& t);

// Duplicated input plus separator, no output. prompt_base is the template's
// framing scaled by tokens_per_word.
WorkloadDescriptor jpt_descriptor(const PromptTemplate& t, double tokens_per_word);

// Generative reference workloads, parameterized by their output format:
//   "one-type-per-query"  a query per entity type, a JSON list of mentions each
//   "tagged-rewrite"      rewrites every input token with a label
//   "entity-list"         one query, (mention, type) pairs with definitions
// Framing sizes are free parameters; see the defaults in cost.cpp.
std::vector<WorkloadDescriptor> generative_descriptors(double jpt_prompt_base);

struct CostRow {
  std::string method;
  bool generative = true;
  TokenCounts tokens;
  double cost = 0.0;
  double ratio_to_jpt = 0.0;  // cost / JPT cost
};

struct CostReport {
  CostModel model;
  WorkloadStats stats;
  std::vector<CostRow> rows;  // JPT first
  double dataset_cost_jpt = 0.0;  // JPT cost times stats.samples

  // True when JPT is strictly cheaper than every generative row.
  bool jpt_cheapest() const;
  std::string table() const;
};

nlohmann::json to_json(const CostReport& r);

// `methods` must contain exactly one non-generative descriptor, JPT.
CostReport profile_cost(const CostModel& model, const std::vector<WorkloadDescriptor>& methods,
                        const WorkloadStats& stats);

// Reported wall-clock seconds on CrossNER-Politics (JPT-4B vs UniNER-7B, same
// GPU, batch size 1). Reported as context only.
struct WallClockContext {
  double jpt_seconds = 89.7;
  double uniner_seconds = 1970.2;
  double ratio() const { return uniner_seconds / jpt_seconds; }
};

}  // namespace jpt
