#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/backbone/transformer.hpp"
#include "jpt/data/tokenizer.hpp"
#include "jpt/embedding/entity.hpp"
#include "jpt/encoder/prompt.hpp"
#include "jpt/eval/spans.hpp"
#include "jpt/head/classifier.hpp"

namespace jpt {

enum class Ablation { kFull, kSinglePass, kPromptOnlyDefinitions, kEmbeddingOnlyDefinitions, kNoDefinitions };

std::string_view ablation_name(Ablation a);  // "full", "single_pass", ...
Ablation parse_ablation(std::string_view name);

struct AblationSettings {
  bool duplicate = true;
  bool prompt_definitions = true;
  EmbeddingText embedding_text = EmbeddingText::kDefinition;
};
AblationSettings settings_for(Ablation a);

struct ModelConfig {
  BackboneConfig backbone;
  LoraConfig lora;
  int d_enc = 32;
  int d_p = 32;
  std::vector<int> token_hidden{64};
  std::vector<int> entity_hidden{64};
  std::string provider = "hash";
  std::string prompt_template = "standard";
  Ablation ablation = Ablation::kFull;
  AlignPolicy align = AlignPolicy::kFirstSubword;
  LossConfig loss;
  std::uint64_t seed = 0;  // adapters, projection networks and heads

  std::vector<int> token_mlp_dims() const;
  std::vector<int> entity_mlp_dims() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Checkpoint directory layout.
inline constexpr const char* kWeightsFile = "weights.jptw";
inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kMetricsFile = "metrics.jsonl";
inline constexpr const char* kCacheFile = "embeddings.jptc";

// Frozen backbone plus everything training may change: adapters (lora.*),
// projection networks (token_mlp.*, entity_mlp.*) and heads (head.*).
class Model {
 public:
  // Fills config.backbone.vocab_size from `vocab` when it is 0.
  static Model create(ModelConfig config, Vocabulary vocab);
  // Throws ModelError naming the missing file when `dir` is not a checkpoint.
  static Model load(const std::string& dir);
  void save(const std::string& dir) const;

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return *vocab_; }
  SubwordTokenizer tokenizer() const { return SubwordTokenizer(*vocab_); }
  PromptTemplate prompt_template() const { return PromptTemplate::by_name(config_.prompt_template); }
  RenderOptions render_options() const;
  AblationSettings ablation() const { return settings_for(config_.ablation); }

  const ParamSet& backbone() const { return *backbone_; }
  std::shared_ptr<const ParamSet> backbone_ptr() const { return backbone_; }
  ParamSet& trainable() { return trainable_; }
  const ParamSet& trainable() const { return trainable_; }

  // Toy backbone over a snapshot of the current adapters.
  std::shared_ptr<const SequenceEncoder> make_encoder() const;

  // Hash of every stored tensor (backbone and trainable).
  std::uint64_t checksum() const;
  std::uint64_t backbone_checksum() const { return backbone_->checksum(); }
  nlohmann::json header() const;

 private:
  ModelConfig config_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::shared_ptr<const ParamSet> backbone_;
  ParamSet trainable_;
};

// Words used by the prompt templates, so vocabularies built for training keep
// them whole.
std::vector<std::string> template_vocabulary_texts();

struct ForwardPass {
  PromptRender render;
  ClassifierGraph heads;
};

// The whole pipeline as one graph: render, backbone, second-pass gather,
// projections and both heads. `binding` must hold the backbone and trainable
// tensors.
ForwardPass forward_graph(const Model& model, const Binding& binding, const EntitySchema& schema,
                          const TokenizedText& pieces, const Matrix& raw_entities,
                          std::vector<std::vector<Matrix>>* attentions = nullptr);

}  // namespace jpt
