#include <gtest/gtest.h>

#include "jpt/data/tokenizer.hpp"
#include "jpt/encoder/prompt.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {
namespace {

const std::string kFixtures = JPT_FIXTURES_DIR;

EntitySchema three_types() { return load_schema(kFixtures + "/schemas/three_types.json"); }

TEST(Prompt, StandardTemplateMatchesGolden) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  PromptRender r = render_prompt(three_types(), pre_tokenize("x"), PromptTemplate::standard(), tok);
  EXPECT_EQ(r.text, binio::read_file(kFixtures + "/prompts/three_types.txt"));
}

TEST(Prompt, PassesAlignTokenForToken) {
  Vocabulary vocab = Vocabulary::build({"Alice visited Paris"});
  SubwordTokenizer tok(vocab);
  TokenizedText pieces = tok.tokenize("Alice visited Paris, quickly.");
  PromptRender r = render_prompt(three_types(), pieces, PromptTemplate::standard(), tok);
  ASSERT_EQ(r.first_pass_positions.size(), pieces.size());
  ASSERT_EQ(r.second_pass_positions.size(), pieces.size());
  const auto ids = tok.encode(pieces);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    EXPECT_EQ(r.token_ids[static_cast<std::size_t>(r.first_pass_positions[i])], ids[i]);
    EXPECT_EQ(r.token_ids[static_cast<std::size_t>(r.second_pass_positions[i])], ids[i]);
    if (i > 0) { EXPECT_EQ(r.second_pass_positions[i], r.second_pass_positions[i - 1] + 1); }
  }
  EXPECT_GT(r.sep_position, r.first_pass_positions.back());
  EXPECT_LT(r.sep_position, r.second_pass_positions.front());
  EXPECT_EQ(&r.classified_positions(), &r.second_pass_positions);
}

TEST(Prompt, SinglePassAndNoDefinitions) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  EntitySchema schema = three_types();
  PromptRender single = render_prompt(schema, pre_tokenize("a b"), PromptTemplate::standard(), tok, {true, false});
  EXPECT_TRUE(single.second_pass_positions.empty());
  EXPECT_THROW(duplicate_core(std::vector<int>{}, 1), DataError);
  EXPECT_EQ(single.sep_position, -1);
  EXPECT_EQ(single.first_pass_positions.size(), 2u);
  EXPECT_EQ(&single.classified_positions(), &single.first_pass_positions);
  EXPECT_NE(single.text.find("The first time: 'a b'\n<|im_end|>"), std::string::npos);

  PromptRender names = render_prompt(schema, pre_tokenize("a b"), PromptTemplate::standard(), tok, {false, true});
  EXPECT_EQ(names.text.find(schema.types[0].definition), std::string::npos);
  EXPECT_NE(names.text.find("\"PERSON\""), std::string::npos);
}

TEST(Prompt, CompactDropsSystemAndAckTurns) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  PromptRender r = render_prompt(three_types(), pre_tokenize("x"), PromptTemplate::compact(), tok);
  EXPECT_EQ(r.text.find("system"), std::string::npos);
  EXPECT_EQ(r.text.find("assistant"), std::string::npos);
  EXPECT_NE(r.text.find("The first time: 'x' The second time: 'x'"), std::string::npos);
  EXPECT_THROW(PromptTemplate::by_name("fancy"), UsageError);
}

TEST(Prompt, DuplicateCoreHasLength2nPlus1) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(50));
    std::vector<int> tokens(n);
    for (int& t : tokens) t = static_cast<int>(rng.below(1000)) + 2;
    auto [dup, second] = duplicate_core(tokens, 1);
    ASSERT_EQ(dup.size(), 2 * n + 1);
    EXPECT_EQ(second, static_cast<int>(n) + 1);
    EXPECT_EQ(dup[n], 1);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(dup[i], tokens[i]);
      EXPECT_EQ(dup[n + 1 + i], tokens[i]);
    }
  }
}

TEST(Prompt, ExtractSecondPassGathersRows) {
  Matrix h(5, 2);
  h << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
  std::vector<int> positions = {3, 4};
  Matrix e = extract_second_pass(h, positions);
  ASSERT_EQ(e.rows(), 2);
  EXPECT_EQ(e(0, 0), 6);
  EXPECT_EQ(e(1, 1), 9);
}

}  // namespace
}  // namespace jpt
