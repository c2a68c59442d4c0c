#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "jpt/model/model.hpp"
#include "jpt/nn/mlp.hpp"
#include "jpt/nn/weights_io.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_config() {
  ModelConfig c;
  c.backbone.d_model = 16;
  c.backbone.n_layers = 1;
  c.backbone.n_heads = 2;
  c.backbone.max_seq_len = 256;
  c.lora = {2, 4.0};
  c.d_enc = 8;
  c.d_p = 8;
  c.token_hidden = {16};
  c.entity_hidden = {16};
  c.prompt_template = "compact";
  c.seed = 3;
  return c;
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("jpt_io_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TEST(Weights, SerializeRoundTripIsExact) {
  Rng rng(1);
  ParamSet p;
  p.add("b", random_normal(3, 2, 1.0, rng));
  p.add("a", random_normal(1, 5, 1.0, rng));
  const std::string bytes = serialize_weights({{"k", 1}}, p);
  WeightsFile f = deserialize_weights(bytes);
  EXPECT_EQ(f.header.at("k"), 1);
  EXPECT_EQ(f.params.checksum(), p.checksum());
  EXPECT_EQ(f.params.at("b"), p.at("b"));
  EXPECT_EQ(serialize_weights({{"k", 1}}, f.params), bytes);
}

TEST(Weights, CorruptionIsAModelError) {
  ParamSet p;
  p.add("a", Matrix::Ones(2, 2));
  std::string bytes = serialize_weights({}, p);
  std::string flipped = bytes;
  flipped[flipped.size() - 12] ^= 1;
  EXPECT_THROW(deserialize_weights(flipped), ModelError);
  EXPECT_THROW(deserialize_weights(bytes.substr(0, 10)), ModelError);
  EXPECT_THROW(deserialize_weights("not weights at all"), ModelError);
}

TEST(Params, RoundToF32IsIdempotent) {
  Matrix m(1, 2);
  m << 0.1, 1.0 / 3.0;
  round_to_f32(m);
  EXPECT_EQ(m(0, 0), static_cast<double>(0.1f));
  Matrix again = m;
  round_to_f32(again);
  EXPECT_EQ(again, m);
}

TEST(Mlp, DimsRecoveredFromTensors) {
  Rng rng(2);
  ParamSet p;
  init_mlp(p, "net", {4, 8, 3}, rng);
  EXPECT_EQ(mlp_dims(p, "net"), (std::vector<int>{4, 8, 3}));
  EXPECT_EQ(mlp_apply(p, "net", Matrix::Ones(5, 4)).cols(), 3);
  EXPECT_THROW(mlp_apply(p, "net", Matrix::Ones(5, 3)), ModelError);
  EXPECT_THROW(mlp_dims(p, "missing"), ModelError);
}

TEST(Model, SaveLoadPreservesEverything) {
  Model m = Model::create(tiny_config(), Vocabulary::build(template_vocabulary_texts()));
  EXPECT_EQ(m.config().backbone.vocab_size, static_cast<int>(m.vocab().size()));
  const fs::path dir = temp_dir("model");
  m.save(dir.string());
  EXPECT_TRUE(fs::exists(dir / kWeightsFile));
  EXPECT_TRUE(fs::exists(dir / kVocabFile));
  EXPECT_TRUE(fs::exists(dir / kConfigFile));
  Model back = Model::load(dir.string());
  EXPECT_EQ(back.checksum(), m.checksum());
  EXPECT_EQ(back.backbone_checksum(), m.backbone_checksum());
  EXPECT_EQ(to_json(back.config()), to_json(m.config()));
  EXPECT_EQ(back.vocab().size(), m.vocab().size());
  fs::remove_all(dir);
}

TEST(Model, MissingCheckpointNamesTheFix) {
  try {
    Model::load("/nonexistent/ckpt");
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("jpt train"), std::string::npos) << e.what();
  }
}

TEST(Model, ConfigJsonRoundTrip) {
  ModelConfig c = tiny_config();
  c.ablation = Ablation::kNoDefinitions;
  c.backbone.vocab_size = 10;
  ModelConfig back = model_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(parse_ablation("single_pass"), Ablation::kSinglePass);
  for (Ablation a : {Ablation::kFull, Ablation::kSinglePass, Ablation::kPromptOnlyDefinitions,
                     Ablation::kEmbeddingOnlyDefinitions, Ablation::kNoDefinitions}) {
    EXPECT_EQ(parse_ablation(ablation_name(a)), a);
  }
  EXPECT_THROW(parse_ablation("nope"), UsageError);
}

TEST(Model, AblationSettings) {
  EXPECT_FALSE(settings_for(Ablation::kSinglePass).duplicate);
  EXPECT_FALSE(settings_for(Ablation::kEmbeddingOnlyDefinitions).prompt_definitions);
  EXPECT_EQ(settings_for(Ablation::kPromptOnlyDefinitions).embedding_text, EmbeddingText::kNameOnly);
  AblationSettings none = settings_for(Ablation::kNoDefinitions);
  EXPECT_FALSE(none.prompt_definitions);
  EXPECT_EQ(none.embedding_text, EmbeddingText::kNameOnly);
  EXPECT_TRUE(settings_for(Ablation::kFull).duplicate);
}

}  // namespace
}  // namespace jpt
