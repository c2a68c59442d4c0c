#include <gtest/gtest.h>

#include "jpt/profile/cost.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

WorkloadStats simple_stats() {
  WorkloadStats s;
  s.name = "hand";
  s.mean_input_tokens = 100;
  s.samples = 10;
  return s;
}

WorkloadDescriptor bare_jpt() {
  WorkloadDescriptor d;
  d.method = "jpt";
  d.generative = false;
  d.input_copies = 2;
  d.extra_input = 1;
  d.schema = SchemaText::kNone;
  return d;
}

WorkloadDescriptor bare_generative() {
  WorkloadDescriptor d;
  d.method = "gen";
  d.schema = SchemaText::kNone;
  d.output_base = 50;
  return d;
}

TEST(Cost, HandArithmetic) {
  const WorkloadStats s = simple_stats();
  TokenCounts jpt = token_counts(bare_jpt(), s);
  EXPECT_EQ(jpt.prefill, 201.0);
  EXPECT_EQ(jpt.output, 0.0);
  CostModel m{1.0, 4.0};
  EXPECT_EQ(cost(m, jpt), 201.0);
  TokenCounts gen = token_counts(bare_generative(), s);
  EXPECT_EQ(gen.prefill, 100.0);
  EXPECT_EQ(gen.output, 50.0);
  EXPECT_EQ(cost(m, gen), 300.0);

  CostReport r = profile_cost(m, {bare_generative(), bare_jpt()}, s);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].method, "jpt");
  EXPECT_EQ(r.rows[1].ratio_to_jpt, 300.0 / 201.0);
  EXPECT_EQ(r.dataset_cost_jpt, 2010.0);
  EXPECT_TRUE(r.jpt_cheapest());
}

TEST(Cost, PerTypeQueriesRepeatTheRequest) {
  WorkloadStats s;
  s.mean_input_tokens = 20;
  s.num_types = 3;
  s.type_name_tokens = 2;
  s.mean_entities = 4;
  s.mention_tokens = 2;
  WorkloadDescriptor d;
  d.prompt_base = 10;
  d.per_type_queries = true;
  d.output_per_query = 3;
  d.output_per_entity = 2;
  TokenCounts t = token_counts(d, s);
  EXPECT_EQ(t.prefill, 3 * (20 + 10 + 2));
  EXPECT_EQ(t.output, 3 * 3 + 4 * (2 + 2));

  WorkloadDescriptor list;
  list.schema = SchemaText::kDefinitions;
  list.output_type_names = true;
  list.output_per_input_token = 0.5;
  s.definition_tokens = 7;
  TokenCounts u = token_counts(list, s);
  EXPECT_EQ(u.prefill, 20 + 3 * 7);
  EXPECT_EQ(u.output, 4 * (2 + 2) + 0.5 * 20);
}

TEST(Cost, ValidationAndSerialization) {
  EXPECT_THROW((CostModel{0.0, 1.0}.validate()), UsageError);
  EXPECT_THROW((CostModel{2.0, 1.0}.validate()), UsageError);
  EXPECT_NO_THROW((CostModel{1.0, 1.0}.validate()));
  EXPECT_THROW(profile_cost({}, {bare_generative()}, simple_stats()), UsageError);
  WorkloadDescriptor d = generative_descriptors(12.0)[0];
  EXPECT_EQ(to_json(workload_descriptor_from_json(to_json(d))), to_json(d));
  WorkloadStats s = simple_stats();
  s.num_types = 1;
  EXPECT_EQ(to_json(workload_stats_from_json(to_json(s))), to_json(s));
  EXPECT_THROW(workload_descriptor_from_json({{"x", 1}}), DataError);
}

TEST(Cost, RatioGrowsWithOutputPrice) {
  WorkloadStats s = workload_stats_from_json(
      nlohmann::json::parse(binio::read_file(std::string(JPT_FIXTURES_DIR) + "/workloads/crossner_politics_like.json")));
  WorkloadDescriptor jpt = jpt_descriptor(PromptTemplate::standard(), s.tokens_per_word);
  std::vector<WorkloadDescriptor> methods = generative_descriptors(jpt.prompt_base);
  methods.push_back(jpt);
  double previous_jpt = -1;
  std::vector<double> previous(3, 0.0);
  for (double c_out = 1.0; c_out <= 8.0; c_out += 0.5) {
    CostReport r = profile_cost({1.0, c_out}, methods, s);
    if (previous_jpt >= 0) { EXPECT_EQ(r.rows[0].cost, previous_jpt); }
    previous_jpt = r.rows[0].cost;
    for (std::size_t k = 1; k < r.rows.size(); ++k) {
      EXPECT_GT(r.rows[k].ratio_to_jpt, previous[k - 1]);
      previous[k - 1] = r.rows[k].ratio_to_jpt;
    }
  }
}

TEST(Cost, JptCheapestAcrossThePricingBand) {
  WorkloadStats s = workload_stats_from_json(
      nlohmann::json::parse(binio::read_file(std::string(JPT_FIXTURES_DIR) + "/workloads/crossner_politics_like.json")));
  WorkloadDescriptor jpt = jpt_descriptor(PromptTemplate::standard(), s.tokens_per_word);
  EXPECT_EQ(token_counts(jpt, s).output, 0.0);
  std::vector<WorkloadDescriptor> methods = generative_descriptors(jpt.prompt_base);
  methods.push_back(jpt);
  for (double c_out = 3.0; c_out <= 5.0 + 1e-12; c_out += 0.25) {
    CostReport r = profile_cost({1.0, c_out}, methods, s);
    EXPECT_TRUE(r.jpt_cheapest()) << r.table();
  }
  EXPECT_NEAR(WallClockContext{}.ratio(), 21.96, 0.01);
}

TEST(Cost, FramingWordsOfTheCompactTemplateAreFewer) {
  EXPECT_LT(template_framing_words(PromptTemplate::compact()), template_framing_words(PromptTemplate::standard()));
  EXPECT_EQ(jpt_descriptor(PromptTemplate::standard(), 2.0).prompt_base,
            2.0 * static_cast<double>(template_framing_words(PromptTemplate::standard())));
}

TEST(Cost, MeasureWorkload) {
  Dataset d = parse_conll("Alice B-PER\nlives O\nin O\nNew B-LOC\nYork I-LOC\n\nBob B-PER\n");
  WorkloadStats s = measure_workload(d, 2.0, "tiny");
  EXPECT_EQ(s.samples, 2u);
  EXPECT_EQ(s.mean_input_tokens, 6.0);
  EXPECT_EQ(s.mean_entities, 1.5);
  EXPECT_EQ(s.num_types, 2.0);
  EXPECT_EQ(s.mention_tokens, 4.0 / 3.0 * 2.0);
  EXPECT_THROW(measure_workload(Dataset{}, 1.0, "x"), DataError);
}

}  // namespace
}  // namespace jpt
