#include "jpt/model/model.hpp"

#include <filesystem>
#include <fstream>

#include "jpt/nn/mlp.hpp"
#include "jpt/nn/weights_io.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull:
      return "full";
    case Ablation::kSinglePass:
      return "single_pass";
    case Ablation::kPromptOnlyDefinitions:
      return "prompt_only_definitions";
    case Ablation::kEmbeddingOnlyDefinitions:
      return "embedding_only_definitions";
    case Ablation::kNoDefinitions:
      return "no_definitions";
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : {Ablation::kFull, Ablation::kSinglePass, Ablation::kPromptOnlyDefinitions,
                     Ablation::kEmbeddingOnlyDefinitions, Ablation::kNoDefinitions}) {
    if (ablation_name(a) == name) return a;
  }
  throw UsageError("unknown ablation '" + std::string(name) +
                   "' (expected full, single_pass, prompt_only_definitions, embedding_only_definitions or "
                   "no_definitions)");
}

AblationSettings settings_for(Ablation a) {
  switch (a) {
    case Ablation::kFull:
      return {true, true, EmbeddingText::kDefinition};
    case Ablation::kSinglePass:
      return {false, true, EmbeddingText::kDefinition};
    case Ablation::kPromptOnlyDefinitions:
      return {true, true, EmbeddingText::kNameOnly};
    case Ablation::kEmbeddingOnlyDefinitions:
      return {true, false, EmbeddingText::kDefinition};
    case Ablation::kNoDefinitions:
      return {true, false, EmbeddingText::kNameOnly};
  }
  return {};
}

std::vector<int> ModelConfig::token_mlp_dims() const {
  std::vector<int> dims{backbone.d_model};
  dims.insert(dims.end(), token_hidden.begin(), token_hidden.end());
  dims.push_back(d_p);
  return dims;
}

std::vector<int> ModelConfig::entity_mlp_dims() const {
  std::vector<int> dims{d_enc};
  dims.insert(dims.end(), entity_hidden.begin(), entity_hidden.end());
  dims.push_back(d_p);
  return dims;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"backbone", to_json(c.backbone)},
          {"lora", to_json(c.lora)},
          {"d_enc", c.d_enc},
          {"d_p", c.d_p},
          {"token_hidden", c.token_hidden},
          {"entity_hidden", c.entity_hidden},
          {"provider", c.provider},
          {"prompt_template", c.prompt_template},
          {"ablation", std::string(ablation_name(c.ablation))},
          {"align", c.align == AlignPolicy::kFirstSubword ? "first_subword" : "majority"},
          {"loss", to_json(c.loss)},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.backbone = backbone_config_from_json(j.at("backbone"));
    c.lora = lora_config_from_json(j.at("lora"));
    c.d_enc = j.at("d_enc").get<int>();
    c.d_p = j.at("d_p").get<int>();
    c.token_hidden = j.at("token_hidden").get<std::vector<int>>();
    c.entity_hidden = j.at("entity_hidden").get<std::vector<int>>();
    c.provider = j.at("provider").get<std::string>();
    c.prompt_template = j.at("prompt_template").get<std::string>();
    c.ablation = parse_ablation(j.at("ablation").get<std::string>());
    c.align = parse_align_policy(j.value("align", "first_subword"));
    c.loss = loss_config_from_json(j.at("loss"));
    c.seed = j.value("seed", std::uint64_t{0});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("bad model config: ") + e.what());
  }
}

Model Model::create(ModelConfig config, Vocabulary vocab) {
  if (config.backbone.vocab_size == 0) config.backbone.vocab_size = static_cast<int>(vocab.size());
  if (config.backbone.vocab_size != static_cast<int>(vocab.size())) {
    throw ModelError("backbone vocab_size " + std::to_string(config.backbone.vocab_size) +
                     " does not match the vocabulary (" + std::to_string(vocab.size()) + " pieces)");
  }
  config.loss.validate();
  Model m;
  m.config_ = config;
  m.vocab_ = std::make_shared<const Vocabulary>(std::move(vocab));
  m.backbone_ = std::make_shared<const ParamSet>(init_backbone(config.backbone));
  Rng rng(config.seed);
  m.trainable_ = init_lora(config.backbone, config.lora, rng);
  init_mlp(m.trainable_, kTokenMlpPrefix, config.token_mlp_dims(), rng);
  init_mlp(m.trainable_, kEntityMlpPrefix, config.entity_mlp_dims(), rng);
  init_head(m.trainable_, kSoftmaxHead, config.d_p, rng);
  init_head(m.trainable_, kSigmoidHead, config.d_p, rng);
  return m;
}

RenderOptions Model::render_options() const {
  const AblationSettings s = ablation();
  return {s.prompt_definitions, s.duplicate};
}

std::shared_ptr<const SequenceEncoder> Model::make_encoder() const {
  auto lora = std::make_shared<ParamSet>();
  for (const auto& [name, m] : trainable_.tensors()) {
    if (name.rfind("lora.", 0) == 0) lora->add(name, m);
  }
  return std::make_shared<ToyTransformer>(config_.backbone, backbone_, config_.lora, std::move(lora));
}

std::uint64_t Model::checksum() const {
  return Fnv1a64().update_pod(backbone_->checksum()).update_pod(trainable_.checksum()).digest();
}

nlohmann::json Model::header() const { return {{"format", "jpt-checkpoint"}, {"config", to_json(config_)}}; }

void Model::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  ParamSet all = *backbone_;
  all.merge(trainable_);
  save_weights(dir + "/" + kWeightsFile, header(), all);
  vocab_->save(dir + "/" + kVocabFile);
  binio::write_file(dir + "/" + kConfigFile, to_json(config_).dump(2) + "\n");
}

Model Model::load(const std::string& dir) {
  for (const char* f : {kWeightsFile, kVocabFile}) {
    if (!std::filesystem::exists(dir + "/" + f)) {
      throw ModelError("checkpoint " + dir + " has no " + f + "; train one with `jpt train --out " + dir + "`");
    }
  }
  WeightsFile w = load_weights(dir + "/" + kWeightsFile);
  if (!w.header.contains("config")) throw ModelError(dir + ": weights header has no config echo");
  Model m;
  m.config_ = model_config_from_json(w.header.at("config"));
  m.vocab_ = std::make_shared<const Vocabulary>(Vocabulary::load(dir + "/" + kVocabFile));
  if (static_cast<int>(m.vocab_->size()) != m.config_.backbone.vocab_size) {
    throw ModelError(dir + ": vocabulary size does not match the backbone config");
  }
  ParamSet backbone;
  for (auto& [name, t] : w.params.tensors()) {
    if (name.rfind("backbone.", 0) == 0) {
      backbone.add(name, std::move(t));
    } else {
      m.trainable_.add(name, std::move(t));
    }
  }
  const ParamSet expected = init_backbone(m.config_.backbone);
  for (const auto& [name, t] : expected.tensors()) {
    if (!backbone.contains(name)) throw ModelError(dir + ": missing backbone tensor " + name);
    if (backbone.at(name).rows() != t.rows() || backbone.at(name).cols() != t.cols()) {
      throw ModelError(dir + ": backbone tensor " + name + " has the wrong shape");
    }
  }
  m.backbone_ = std::make_shared<const ParamSet>(std::move(backbone));
  ParamSet lora;
  for (const auto& [name, t] : m.trainable_.tensors()) {
    if (name.rfind("lora.", 0) == 0) lora.add(name, t);
  }
  validate_lora(m.config_.backbone, m.config_.lora, lora);
  mlp_dims(m.trainable_, kTokenMlpPrefix);
  mlp_dims(m.trainable_, kEntityMlpPrefix);
  return m;
}

std::vector<std::string> template_vocabulary_texts() {
  const PromptTemplate t = PromptTemplate::standard();
  return {"system user assistant", t.system_text, t.schema_turn_template, t.definition_line_template,
          t.assistant_ack_text, t.duplicated_turn_template, "0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16"};
}

ForwardPass forward_graph(const Model& model, const Binding& binding, const EntitySchema& schema,
                          const TokenizedText& pieces, const Matrix& raw_entities,
                          std::vector<std::vector<Matrix>>* attentions) {
  ForwardPass out;
  out.render = render_prompt(schema, pieces, model.prompt_template(), model.tokenizer(), model.render_options());
  ad::Var hidden =
      transformer_forward(binding, model.config().backbone, model.config().lora, out.render.token_ids, attentions);
  ad::Var states = ad::gather_rows(hidden, out.render.classified_positions());
  out.heads = classifier_forward(binding, states, binding.graph().constant(raw_entities));
  return out;
}

}  // namespace jpt
