#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/model/model.hpp"
#include "jpt/train/trainer.hpp"
#include "jpt/util/config.hpp"

namespace jpt {

struct DataConfig {
  std::string train = "synthetic";  // dataset path (.conll/.jsonl) or "synthetic"
  std::string eval = "synthetic";
  int synthetic_train = 1200;
  int synthetic_eval = 200;
  std::uint64_t synthetic_seed = 0;  // eval set uses synthetic_seed + 1000
};

// Everything `jpt train` needs. Config sections map as
//   [model]    top-level ModelConfig fields (d_enc, d_p, provider, ...)
//   [backbone] [lora] [loss]  the nested ModelConfig parts
//   [train]    TrainConfig
//   [data]     DataConfig
// Unknown keys are rejected. If lora.rank is given without lora.alpha, alpha
// defaults to 2 * rank.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

RunConfig run_config_from(const ConfigFile& cfg);
nlohmann::json to_json(const RunConfig& c);

// Loads one side of DataConfig: a file, or the synthetic grammar.
Dataset load_run_dataset(const DataConfig& d, bool eval_split);

}  // namespace jpt
