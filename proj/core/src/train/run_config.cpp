#include "jpt/train/run_config.hpp"

#include "jpt/train/synthetic.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

nlohmann::json data_to_json(const DataConfig& d) {
  return {{"train", d.train},
          {"eval", d.eval},
          {"synthetic_train", d.synthetic_train},
          {"synthetic_eval", d.synthetic_eval},
          {"synthetic_seed", d.synthetic_seed}};
}

DataConfig data_from_json(const nlohmann::json& j) {
  DataConfig d;
  d.train = j.at("train").get<std::string>();
  d.eval = j.at("eval").get<std::string>();
  d.synthetic_train = j.at("synthetic_train").get<int>();
  d.synthetic_eval = j.at("synthetic_eval").get<int>();
  d.synthetic_seed = j.at("synthetic_seed").get<std::uint64_t>();
  if (d.synthetic_train <= 0 || d.synthetic_eval <= 0) {
    throw UsageError("data.synthetic_train and data.synthetic_eval must be positive");
  }
  return d;
}

}  // namespace

RunConfig run_config_from(const ConfigFile& cfg) {
  nlohmann::json model = to_json(ModelConfig{});
  model["backbone"]["d_ff"] = 0;
  nlohmann::json train = to_json(TrainConfig{});
  nlohmann::json data = data_to_json(DataConfig{});

  for (const auto& [key, value] : cfg.values()) {
    std::size_t dot = key.find('.');
    std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    nlohmann::json* target = nullptr;
    if (section == "model") target = &model;
    else if (section == "backbone" || section == "lora" || section == "loss") target = &model[section];
    else if (section == "train") target = &train;
    else if (section == "data") target = &data;
    if (target == nullptr || !target->contains(name) || (*target)[name].is_object()) {
      throw UsageError("unknown config key '" + key + "'");
    }
    (*target)[name] = value;
  }
  if (cfg.has("lora.rank") && !cfg.has("lora.alpha")) {
    model["lora"]["alpha"] = 2.0 * model["lora"]["rank"].get<double>();
  }

  // vocab_size 0 means the training vocabulary size.
  const int vocab_size = model["backbone"]["vocab_size"].get<int>();
  if (vocab_size == 0) model["backbone"]["vocab_size"] = 1;

  try {
    RunConfig out;
    out.model = model_config_from_json(model);
    out.model.backbone.vocab_size = vocab_size;
    out.train = train_config_from_json(train);
    out.data = data_from_json(data);
    out.model.loss.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const ModelError& e) {
    throw UsageError(e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"model", to_json(c.model)}, {"train", to_json(c.train)}, {"data", data_to_json(c.data)}};
}

Dataset load_run_dataset(const DataConfig& d, bool eval_split) {
  const std::string& source = eval_split ? d.eval : d.train;
  if (source == "synthetic") {
    return generate_synthetic(SyntheticGrammar::standard(),
                              static_cast<std::size_t>(eval_split ? d.synthetic_eval : d.synthetic_train),
                              eval_split ? d.synthetic_seed + 1000 : d.synthetic_seed);
  }
  return read_dataset(source);
}

}  // namespace jpt
