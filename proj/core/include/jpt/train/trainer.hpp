#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/data/dataset.hpp"
#include "jpt/embedding/cache.hpp"
#include "jpt/model/model.hpp"

namespace jpt {

struct TrainConfig {
  double learning_rate = 5e-5;
  double warmup_ratio = 0.10;
  int batch_size = 8;  // effective, per optimizer step
  int grad_accum = 2;  // micro-batches per step
  int epochs = 5;
  int max_seq_len = 4096;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;  // data order

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Linear warmup over ceil(warmup_ratio * total) steps from 0 to peak, then a
// cosine decay that reaches 0 at step == total.
class LrSchedule {
 public:
  LrSchedule(double peak, double warmup_ratio, std::size_t total_steps);
  double at(std::size_t step) const;
  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

 private:
  double peak_;
  std::size_t warmup_;
  std::size_t total_;
};

// Decoupled weight decay Adam over a ParamSet.
class AdamW {
 public:
  AdamW(const ParamSet& params, double beta1, double beta2, double eps, double weight_decay);
  void step(ParamSet& params, const ParamSet& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  ParamSet m_, v_;
  std::size_t t_ = 0;
};

// Scales `grads` so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double ce = 0.0;
  double focal = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

std::string metrics_to_jsonl(const StepMetrics& m);

struct TrainResult {
  std::vector<StepMetrics> metrics;
  bool diverged = false;  // parameters are the last finite ones
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;
};

// Per-record losses on the classified (second-pass) positions. Gold labels
// are per unit; a piece takes the label of its unit.
struct RecordLoss {
  double ce = 0.0;
  double focal = 0.0;
  double total = 0.0;
};
RecordLoss record_loss(const Model& model, const Binding& binding, const EntitySchema& schema,
                       const TokenizedText& units, std::span<const int> unit_labels, const Matrix& raw_entities,
                       bool backward);

// Trains model.trainable() in place; the backbone is bound frozen and never
// enters the optimizer. `on_step` sees every logged step.
TrainResult train(Model& model, const TrainConfig& config, const Dataset& data, const EmbeddingProvider& provider,
                  EmbeddingCache& cache, const std::function<void(const StepMetrics&)>& on_step = {});

// Vocabulary over the template text, every schema and every record.
Vocabulary build_vocabulary(const Dataset& data);

struct SweepRow {
  int rank = 0;
  double token_f1 = 0.0;
  double span_f1 = 0.0;
  double ambiguous_accuracy = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  bool non_decreasing = true;
  std::string summary;
};

// One model per rank (same seeds, alpha = 2 * rank); rank 0 trains without
// adapters. Throws UsageError on duplicate or negative ranks.
SweepReport sweep_lora(const std::vector<int>& ranks, const ModelConfig& base, const TrainConfig& train_config,
                       const Dataset& train_data, const Dataset& eval_data, const EmbeddingProvider& provider,
                       EmbeddingCache& cache);

}  // namespace jpt
