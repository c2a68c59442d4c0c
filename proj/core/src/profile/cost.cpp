#include "jpt/profile/cost.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "jpt/util/error.hpp"

namespace jpt {
namespace {

std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Drops {placeholder} fields.
std::string strip_placeholders(const std::string& s) {
  std::string out;
  bool in_field = false;
  for (char c : s) {
    if (c == '{') in_field = true;
    else if (c == '}') in_field = false;
    else if (!in_field) out.push_back(c);
  }
  return out;
}

const char* schema_text_name(SchemaText s) {
  switch (s) {
    case SchemaText::kNone: return "none";
    case SchemaText::kNames: return "names";
    case SchemaText::kDefinitions: return "definitions";
  }
  return "none";
}

SchemaText parse_schema_text(const std::string& s) {
  if (s == "none") return SchemaText::kNone;
  if (s == "names") return SchemaText::kNames;
  if (s == "definitions") return SchemaText::kDefinitions;
  throw UsageError("unknown schema text mode '" + s + "' (expected none, names or definitions)");
}

double schema_tokens_per_type(const WorkloadDescriptor& d, const WorkloadStats& s) {
  switch (d.schema) {
    case SchemaText::kNone: return 0.0;
    case SchemaText::kNames: return s.type_name_tokens;
    case SchemaText::kDefinitions: return s.definition_tokens;
  }
  return 0.0;
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

void CostModel::validate() const {
  if (!(c_in > 0.0) || !std::isfinite(c_in) || !std::isfinite(c_out)) {
    throw UsageError("cost model needs a positive, finite c_in");
  }
  if (c_out < c_in) throw UsageError("cost model needs c_out >= c_in");
}

nlohmann::json to_json(const WorkloadStats& s) {
  return {{"name", s.name},
          {"mean_input_tokens", s.mean_input_tokens},
          {"mean_entities", s.mean_entities},
          {"num_types", s.num_types},
          {"mention_tokens", s.mention_tokens},
          {"type_name_tokens", s.type_name_tokens},
          {"definition_tokens", s.definition_tokens},
          {"tokens_per_word", s.tokens_per_word},
          {"samples", s.samples}};
}

WorkloadStats workload_stats_from_json(const nlohmann::json& j) {
  try {
    WorkloadStats s;
    s.name = j.value("name", "");
    s.mean_input_tokens = j.at("mean_input_tokens").get<double>();
    s.mean_entities = j.at("mean_entities").get<double>();
    s.num_types = j.at("num_types").get<double>();
    s.mention_tokens = j.at("mention_tokens").get<double>();
    s.type_name_tokens = j.at("type_name_tokens").get<double>();
    s.definition_tokens = j.at("definition_tokens").get<double>();
    s.tokens_per_word = j.value("tokens_per_word", 1.0);
    s.samples = j.value("samples", std::size_t{0});
    if (s.mean_input_tokens <= 0.0 || s.num_types <= 0.0 || s.mean_entities < 0.0) {
      throw DataError("workload stats need positive mean_input_tokens and num_types");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad workload stats: ") + e.what());
  }
}

WorkloadStats measure_workload(const Dataset& data, double tokens_per_word, const std::string& name) {
  if (data.records.empty()) throw DataError("cannot measure an empty dataset");
  WorkloadStats s;
  s.name = name;
  s.tokens_per_word = tokens_per_word;
  s.samples = data.records.size();
  double words = 0, entities = 0, mention_words = 0, types = 0, name_words = 0, def_words = 0, type_rows = 0;
  for (const DatasetRecord& r : data.records) {
    words += static_cast<double>(r.text.size());
    entities += static_cast<double>(r.gold.spans.size());
    for (const TokenSpan& sp : r.gold.spans) mention_words += sp.end - sp.start;
    const EntitySchema& schema = data.schema_of(r);
    types += static_cast<double>(schema.num_types());
    for (const EntityTypeDef& t : schema.types) {
      name_words += static_cast<double>(count_words(t.name));
      def_words += static_cast<double>(count_words(t.name) + count_words(t.definition));
      type_rows += 1;
    }
  }
  double n = static_cast<double>(s.samples);
  s.mean_input_tokens = words / n * tokens_per_word;
  s.mean_entities = entities / n;
  s.num_types = types / n;
  s.mention_tokens = entities > 0 ? mention_words / entities * tokens_per_word : 0.0;
  s.type_name_tokens = type_rows > 0 ? name_words / type_rows * tokens_per_word : 0.0;
  s.definition_tokens = type_rows > 0 ? def_words / type_rows * tokens_per_word : 0.0;
  return s;
}

nlohmann::json to_json(const WorkloadDescriptor& d) {
  return {{"method", d.method},
          {"generative", d.generative},
          {"input_copies", d.input_copies},
          {"extra_input", d.extra_input},
          {"prompt_base", d.prompt_base},
          {"schema", schema_text_name(d.schema)},
          {"per_type_queries", d.per_type_queries},
          {"output_base", d.output_base},
          {"output_per_query", d.output_per_query},
          {"output_per_entity", d.output_per_entity},
          {"output_type_names", d.output_type_names},
          {"output_per_input_token", d.output_per_input_token}};
}

WorkloadDescriptor workload_descriptor_from_json(const nlohmann::json& j) {
  try {
    WorkloadDescriptor d;
    d.method = j.at("method").get<std::string>();
    d.generative = j.value("generative", true);
    d.input_copies = j.value("input_copies", d.input_copies);
    d.extra_input = j.value("extra_input", d.extra_input);
    d.prompt_base = j.value("prompt_base", d.prompt_base);
    d.schema = parse_schema_text(j.value("schema", "names"));
    d.per_type_queries = j.value("per_type_queries", false);
    d.output_base = j.value("output_base", 0.0);
    d.output_per_query = j.value("output_per_query", 0.0);
    d.output_per_entity = j.value("output_per_entity", 0.0);
    d.output_type_names = j.value("output_type_names", false);
    d.output_per_input_token = j.value("output_per_input_token", 0.0);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad workload descriptor: ") + e.what());
  }
}

TokenCounts token_counts(const WorkloadDescriptor& d, const WorkloadStats& s) {
  double n = s.mean_input_tokens;
  double per_type = schema_tokens_per_type(d, s);
  double queries = d.per_type_queries ? s.num_types : 1.0;
  double schema_per_query = d.per_type_queries ? per_type : per_type * s.num_types;
  double per_entity = s.mention_tokens + d.output_per_entity + (d.output_type_names ? s.type_name_tokens : 0.0);

  TokenCounts t;
  t.prefill = queries * (d.input_copies * n + d.extra_input + d.prompt_base + schema_per_query);
  if (d.generative) {
    t.output = d.output_base + queries * d.output_per_query + s.mean_entities * per_entity +
               queries * d.output_per_input_token * n;
  }
  return t;
}

double cost(const CostModel& m, const TokenCounts& t) { return t.prefill * m.c_in + t.output * m.c_out; }

std::size_t template_framing_words(const PromptTemplate& t) {
  std::size_t words = count_words(t.system_text) + count_words(t.assistant_ack_text) +
                      count_words(strip_placeholders(t.schema_turn_template)) +
                      count_words(strip_placeholders(t.duplicated_turn_template));
  std::size_t turns = 1 + (t.system_text.empty() ? 0 : 1) + (t.assistant_ack_text.empty() ? 0 : 1) + 1;
  // Each turn adds its start/end specials and a role word.
  return words + 3 * turns;
}

WorkloadDescriptor jpt_descriptor(const PromptTemplate& t, double tokens_per_word) {
  WorkloadDescriptor d;
  d.method = "jpt";
  d.generative = false;
  d.input_copies = 2.0;
  d.extra_input = 1.0;
  d.prompt_base = static_cast<double>(template_framing_words(t)) * tokens_per_word;
  d.schema = SchemaText::kDefinitions;
  return d;
}

std::vector<WorkloadDescriptor> generative_descriptors(double jpt_prompt_base) {
  WorkloadDescriptor per_type;
  per_type.method = "one-type-per-query";
  per_type.prompt_base = 30.0;  // short chat framing around "Text: ... What describes <type>?"
  per_type.schema = SchemaText::kNames;
  per_type.per_type_queries = true;
  per_type.output_per_query = 3.0;   // brackets and end-of-sequence
  per_type.output_per_entity = 2.0;  // quotes and separator

  WorkloadDescriptor rewrite;
  rewrite.method = "tagged-rewrite";
  rewrite.prompt_base = 40.0;
  rewrite.schema = SchemaText::kNames;
  rewrite.output_base = 1.0;
  rewrite.output_per_input_token = 3.0;  // the token itself plus a bracketed label

  WorkloadDescriptor list;
  list.method = "entity-list";
  list.prompt_base = jpt_prompt_base;  // same instruction budget as JPT
  list.schema = SchemaText::kDefinitions;
  list.output_base = 5.0;
  list.output_per_entity = 4.0;  // brackets, quotes, separators
  list.output_type_names = true;

  return {per_type, rewrite, list};
}

bool CostReport::jpt_cheapest() const {
  double jpt = 0.0;
  for (const CostRow& r : rows) {
    if (!r.generative) jpt = r.cost;
  }
  for (const CostRow& r : rows) {
    if (r.generative && !(jpt < r.cost)) return false;
  }
  return true;
}

std::string CostReport::table() const {
  std::ostringstream out;
  out << "workload " << (stats.name.empty() ? "<unnamed>" : stats.name) << ": n=" << fmt(stats.mean_input_tokens, 1)
      << " tokens, N=" << fmt(stats.num_types, 1) << " types, " << fmt(stats.mean_entities, 2)
      << " entities/sample; c_in=" << fmt(model.c_in, 2) << " c_out=" << fmt(model.c_out, 2) << "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %10s %10s %12s %10s\n", "method", "prefill", "output", "cost", "x JPT");
  out << line;
  for (const CostRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-20s %10.1f %10.1f %12.2f %10.2f\n", r.method.c_str(), r.tokens.prefill,
                  r.tokens.output, r.cost, r.ratio_to_jpt);
    out << line;
  }
  return out.str();
}

nlohmann::json to_json(const CostReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const CostRow& row : r.rows) {
    rows.push_back({{"method", row.method},
                    {"generative", row.generative},
                    {"prefill_tokens", row.tokens.prefill},
                    {"output_tokens", row.tokens.output},
                    {"cost", row.cost},
                    {"ratio_to_jpt", row.ratio_to_jpt}});
  }
  WallClockContext wall;
  return {{"c_in", r.model.c_in},
          {"c_out", r.model.c_out},
          {"workload", to_json(r.stats)},
          {"rows", rows},
          {"dataset_cost_jpt", r.dataset_cost_jpt},
          {"jpt_cheapest", r.jpt_cheapest()},
          {"wall_clock_context",
           {{"jpt_seconds", wall.jpt_seconds},
            {"uniner_seconds", wall.uniner_seconds},
            {"ratio", wall.ratio()},
            {"reproduced", false}}}};
}

CostReport profile_cost(const CostModel& model, const std::vector<WorkloadDescriptor>& methods,
                        const WorkloadStats& stats) {
  model.validate();
  CostReport report;
  report.model = model;
  report.stats = stats;
  const WorkloadDescriptor* jpt = nullptr;
  for (const WorkloadDescriptor& d : methods) {
    if (d.generative) continue;
    if (jpt != nullptr) throw UsageError("profile_cost expects exactly one non-generative method");
    jpt = &d;
  }
  if (jpt == nullptr) throw UsageError("profile_cost needs the JPT descriptor");
  double jpt_cost = cost(model, token_counts(*jpt, stats));
  report.rows.push_back({jpt->method, false, token_counts(*jpt, stats), jpt_cost, 1.0});
  for (const WorkloadDescriptor& d : methods) {
    if (!d.generative) continue;
    TokenCounts t = token_counts(d, stats);
    double c = cost(model, t);
    report.rows.push_back({d.method, true, t, c, c / jpt_cost});
  }
  report.dataset_cost_jpt = jpt_cost * static_cast<double>(stats.samples);
  return report;
}

}  // namespace jpt
