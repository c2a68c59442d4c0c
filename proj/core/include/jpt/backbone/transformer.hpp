#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpt/nn/params.hpp"

namespace jpt {

enum class Projection { kQuery, kKey, kValue, kOutput };

inline constexpr Projection kAllProjections[] = {Projection::kQuery, Projection::kKey, Projection::kValue,
                                                 Projection::kOutput};

std::string_view projection_name(Projection p);  // "q_proj", ...
// Accepts "q", "q_proj" or "query" (and the k/v/o equivalents).
Projection parse_projection(std::string_view name);

struct BackboneConfig {
  int vocab_size = 0;
  int d_model = 32;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 0;  // 0 means 4 * d_model
  int max_seq_len = 512;
  std::uint64_t rng_seed = 0;

  int ffn_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  int head_dim() const { return d_model / n_heads; }
  void validate() const;
};

nlohmann::json to_json(const BackboneConfig& c);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

struct LoraConfig {
  int rank = 0;  // 0 disables the adapters
  double alpha = 0.0;
  std::vector<Projection> targets{std::begin(kAllProjections), std::end(kAllProjections)};

  double scaling() const { return rank > 0 ? alpha / rank : 0.0; }
  bool targets_projection(Projection p) const;
};

nlohmann::json to_json(const LoraConfig& c);
LoraConfig lora_config_from_json(const nlohmann::json& j);

struct EncoderOutput {
  Matrix hidden;  // L x d_model
  // attentions[layer][head] is L x L; empty unless recording was requested.
  std::vector<std::vector<Matrix>> attentions;

  bool has_attentions() const { return !attentions.empty(); }
};

// Anything that maps token ids to final-layer hidden states under a causal
// mask. Implementations must be safe to call concurrently.
class SequenceEncoder {
 public:
  virtual ~SequenceEncoder() = default;
  virtual EncoderOutput encode(std::span<const int> token_ids, bool record_attention) const = 0;
  virtual int hidden_size() const = 0;
  virtual int max_seq_len() const = 0;
};

// Tensor names.
std::string projection_weight_name(int layer, Projection p);
std::string lora_a_name(int layer, Projection p);  // r x d_in
std::string lora_b_name(int layer, Projection p);  // d_out x r

// Pre-norm decoder blocks with learned absolute positions, GELU feed-forward
// and a final LayerNorm. Values are drawn from config.rng_seed.
ParamSet init_backbone(const BackboneConfig& config);
// A ~ N(0, 1/d_in), B = 0, so a fresh adapter leaves the model unchanged.
ParamSet init_lora(const BackboneConfig& config, const LoraConfig& lora, Rng& rng);
// Throws ModelError when an adapter tensor names a projection outside
// lora.targets, or when shapes do not match the projection.
void validate_lora(const BackboneConfig& config, const LoraConfig& lora, const ParamSet& lora_params);

// Copy of `base` whose targeted projections hold W + (alpha/r) * B * A.
ParamSet apply_lora(const ParamSet& base, const BackboneConfig& config, const LoraConfig& lora,
                    const ParamSet& lora_params);

// Forward graph. Adapter tensors are used when bound (lora.rank > 0); pass
// `attentions` to capture per-layer, per-head attention probabilities.
ad::Var transformer_forward(const Binding& binding, const BackboneConfig& config, const LoraConfig& lora,
                            std::span<const int> token_ids, std::vector<std::vector<Matrix>>* attentions);

class ToyTransformer : public SequenceEncoder {
 public:
  ToyTransformer(BackboneConfig config, std::shared_ptr<const ParamSet> weights, LoraConfig lora = {},
                 std::shared_ptr<const ParamSet> lora_params = nullptr);

  EncoderOutput encode(std::span<const int> token_ids, bool record_attention) const override;
  int hidden_size() const override { return config_.d_model; }
  int max_seq_len() const override { return config_.max_seq_len; }

  const BackboneConfig& config() const { return config_; }
  const LoraConfig& lora() const { return lora_; }
  const ParamSet& weights() const { return *weights_; }

 private:
  BackboneConfig config_;
  std::shared_ptr<const ParamSet> weights_;
  LoraConfig lora_;
  std::shared_ptr<const ParamSet> lora_params_;
};

// Parameter accounting for adapters on an arbitrary projection layout.
struct ProjectionShape {
  Projection projection;
  long long d_in = 0;
  long long d_out = 0;
};

struct TrainableCount {
  long long trainable = 0;
  long long adapter = 0;
  double fraction = 0.0;  // trainable / (backbone_total + trainable)
};

std::vector<ProjectionShape> projection_shapes(const BackboneConfig& config);
long long backbone_parameter_count(const BackboneConfig& config);
TrainableCount count_trainable(const std::vector<ProjectionShape>& per_layer, int n_layers, long long backbone_total,
                               const LoraConfig& lora, long long head_params);
TrainableCount count_trainable(const BackboneConfig& config, const LoraConfig& lora, long long head_params);

// Mean over layers and heads of attention from second-pass position i to
// first-pass position j.
Matrix attention_rollup(const EncoderOutput& output, std::span<const int> second_pass_positions,
                        std::span<const int> first_pass_positions);

// Header row: empty corner cell then column labels; each row: label, values.
std::string attention_to_csv(const Matrix& m, const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& col_labels);
struct LabeledMatrix {
  Matrix values;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
};
LabeledMatrix attention_from_csv(const std::string& csv);

}  // namespace jpt
