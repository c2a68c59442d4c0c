#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "jpt/data/dataset.hpp"
#include "jpt/data/schema.hpp"
#include "jpt/data/tokenizer.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

TEST(PreTokenize, SplitsPunctuationAndKeepsOffsets) {
  TokenizedText t = pre_tokenize("  mühlberg-ulze, born\tin Bonn.");
  std::vector<std::string> expected = {"mühlberg", "-", "ulze", ",", "born", "in", "Bonn", "."};
  EXPECT_EQ(t.tokens, expected);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t.raw_text.substr(t.char_spans[i].start, t.char_spans[i].end - t.char_spans[i].start), t.tokens[i]);
  }
  EXPECT_NO_THROW(t.validate());
  EXPECT_TRUE(pre_tokenize(" \t\n").empty());
}

TEST(PreTokenize, DetokenizeRoundTripsNormalizedText) {
  const std::string text = "Alice met Bob in Paris , France .";
  EXPECT_EQ(detokenize(pre_tokenize(text)), text);
  EXPECT_EQ(normalize_whitespace("  a \t b\n\nc  "), "a b c");
}

TEST(SubwordTokenizer, AsciiWordsNeverProduceUnk) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  std::mt19937 rng(7);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string word;
    for (int i = 0; i < 1 + trial % 12; ++i) word += alphabet[ch(rng)];
    for (int id : tok.encode(word)) EXPECT_NE(id, Vocabulary::kUnk) << word;
  }
}

TEST(SubwordTokenizer, PiecesConcatenateToWords) {
  Vocabulary vocab = Vocabulary::build({"Alice lives in Paris"});
  SubwordTokenizer tok(vocab);
  TokenizedText t = tok.tokenize("Alice lives in Montreal");
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(detokenize(t), "Alice lives in Montreal");
  EXPECT_EQ(t.tokens[0], "Alice");
  EXPECT_GT(t.size(), 4u);  // Montreal is split
  EXPECT_EQ(t.word_ids.back(), 3);
}

TEST(SubwordTokenizer, InvalidUtf8MapsToUnk) {
  Vocabulary vocab;
  SubwordTokenizer tok(vocab);
  std::string bad = "a\xff" "b";
  auto ids = tok.encode(bad);
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[1], Vocabulary::kUnk);
  EXPECT_EQ(utf8_sequence_length(bad, 1), 0u);
  EXPECT_EQ(utf8_sequence_length("ü", 0), 2u);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  Vocabulary vocab = Vocabulary::build({"x y z", "y"}, 1);
  auto path = std::filesystem::temp_directory_path() / "jpt_vocab_test.txt";
  vocab.save(path.string());
  Vocabulary back = Vocabulary::load(path.string());
  ASSERT_EQ(back.size(), vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) EXPECT_EQ(back.piece(static_cast<int>(i)), vocab.piece(static_cast<int>(i)));
  std::filesystem::remove(path);
}

TEST(Schema, LookupValidationAndIds) {
  EntitySchema s{{{"PER", "a person"}, {"LOC", "a place"}}};
  EXPECT_EQ(s.class_of("per"), 1);
  EXPECT_EQ(s.class_of("LOC"), 2);
  EXPECT_FALSE(s.class_of("ORG"));
  EXPECT_EQ(s.name_of(0), "O");
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.id(), schema_from_json(schema_to_json(s)).id());
  EntitySchema other = s;
  other.types[0].definition = "someone";
  EXPECT_NE(s.id(), other.id());
  EXPECT_THROW(EntitySchema{}.validate(), DataError);
  EXPECT_THROW((EntitySchema{{{"a", "x"}, {"A", "y"}}}.validate()), DataError);
  EXPECT_THROW((EntitySchema{{{"a", ""}}}.validate()), DataError);
}

TEST(Gold, BioRoundTrip) {
  GoldAnnotation g{{{0, 2, 1}, {2, 3, 1}, {4, 5, 2}}};
  auto bio = g.bio_labels(6);
  EXPECT_EQ(bio[0], (BioLabel{BioTag::kBegin, 1}));
  EXPECT_EQ(bio[1], (BioLabel{BioTag::kInside, 1}));
  EXPECT_EQ(bio[2], (BioLabel{BioTag::kBegin, 1}));
  EXPECT_EQ(GoldAnnotation::from_bio(bio).spans, g.spans);
  EXPECT_EQ(g.class_labels(6), (std::vector<int>{1, 1, 1, 0, 2, 0}));
  EXPECT_THROW(validate_spans({{0, 2, 1}, {1, 3, 1}}, 4, 1), DataError);
  EXPECT_THROW(validate_spans({{0, 5, 1}}, 4, 1), DataError);
  EXPECT_THROW(validate_spans({{0, 1, 2}}, 4, 1), DataError);
  EXPECT_THROW(validate_spans({{1, 1, 1}}, 4, 1), DataError);
}

TEST(Conll, ParsesRepairsAndRoundTrips) {
  const std::string conll =
      "Alice NNP B-PER\nvisited VBD O\nNew NNP I-LOC\nYork NNP I-LOC\n\n"
      "Bob B-PER\nSmith I-PER\n";
  Dataset d = parse_conll(conll, "t.conll");
  ASSERT_EQ(d.records.size(), 2u);
  const EntitySchema& s = d.schema_of(d.records[0]);
  ASSERT_EQ(s.num_types(), 2u);
  EXPECT_EQ(s.types[0].name, "PER");
  EXPECT_EQ(s.types[1].name, "LOC");
  EXPECT_EQ(d.repairs, 1u);
  EXPECT_EQ(d.records[0].gold.spans, (std::vector<TokenSpan>{{0, 1, 1}, {2, 4, 2}}));
  EXPECT_EQ(d.records[1].gold.spans, (std::vector<TokenSpan>{{0, 2, 1}}));

  Dataset again = parse_conll(format_conll(d));
  EXPECT_EQ(again.repairs, 0u);
  ASSERT_EQ(again.records.size(), 2u);
  EXPECT_EQ(again.records[0].gold.spans, d.records[0].gold.spans);
  EXPECT_EQ(format_conll(again), format_conll(d));
}

TEST(Conll, MalformedTagNamesTheLine) {
  try {
    parse_conll("a O\nb X-PER\n", "bad.conll");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.conll:2"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, ParsesSpansAndAmbiguity) {
  const std::string line =
      R"({"id":"r1","text":"Jordan visited Jordan.","entity_types":[{"name":"PERSON","definition":"a person"},)"
      R"({"name":"LOCATION","definition":"a place"}],"spans":[{"start":0,"end":6,"type":"PERSON"},)"
      R"({"start":15,"end":21,"type":"location"}],"ambiguous":[0,2]})";
  Dataset d = parse_jsonl(line + "\n\n");
  ASSERT_EQ(d.records.size(), 1u);
  const DatasetRecord& r = d.records[0];
  EXPECT_EQ(r.id, "r1");
  EXPECT_EQ(r.gold.spans, (std::vector<TokenSpan>{{0, 1, 1}, {2, 3, 2}}));
  EXPECT_EQ(r.ambiguous, (std::vector<bool>{true, false, true, false}));

  Dataset back = parse_jsonl(format_jsonl(d));
  EXPECT_EQ(back.records[0].gold.spans, r.gold.spans);
  EXPECT_EQ(back.records[0].ambiguous, r.ambiguous);
}

TEST(Jsonl, ErrorsAreDataErrorsWithLocation) {
  const std::string types = R"("entity_types":[{"name":"P","definition":"p"}])";
  auto expect_error = [](const std::string& content, const std::string& fragment) {
    try {
      parse_jsonl(content, "f.jsonl");
      FAIL() << content;
    } catch (const DataError& e) {
      const std::string what = e.what();
      EXPECT_NE(what.find("f.jsonl:"), std::string::npos) << what;
      EXPECT_NE(what.find(fragment), std::string::npos) << what;
    }
  };
  expect_error("{not json}\n", "invalid JSON");
  expect_error(R"({"text": 3})", "string 'text'");
  expect_error(R"({"text": "a"})", "entity_types");
  expect_error(R"({"text":"ab cd",)" + types + R"(,"spans":[{"start":1,"end":5,"type":"P"}]})", "inside token");
  expect_error(R"({"text":"ab",)" + types + R"(,"spans":[{"start":0,"end":9,"type":"P"}]})", "out of range");
  expect_error(R"({"text":"ab",)" + types + R"(,"spans":[{"start":0,"end":2,"type":"Q"}]})", "not in the record");
  expect_error(R"({"text":"ab",)" + types + R"(,"ambiguous":[4]})", "ambiguous");
}

TEST(Dataset, ApplySchemaDefinitions) {
  Dataset d = parse_conll("Alice B-per\n");
  apply_schema_definitions(d, EntitySchema{{{"PER", "a named human"}}});
  EXPECT_EQ(d.schemas[0].types[0].definition, "a named human");
  EXPECT_THROW(apply_schema_definitions(d, EntitySchema{{{"LOC", "x"}}}), DataError);
}

}  // namespace
}  // namespace jpt
