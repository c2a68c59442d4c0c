#include "jpt/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "jpt/service/engine.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw UsageError("learning rate must be positive");
  if (!(warmup_ratio >= 0 && warmup_ratio <= 1)) throw UsageError("warmup ratio must be in [0, 1]");
  if (batch_size <= 0 || grad_accum <= 0) throw UsageError("batch size and accumulation must be positive");
  if (batch_size % grad_accum != 0) {
    throw UsageError("gradient accumulation " + std::to_string(grad_accum) + " does not divide the batch size " +
                     std::to_string(batch_size));
  }
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (max_seq_len < 3) throw UsageError("max_seq_len must be at least 3");
  if (!(clip_norm > 0)) throw UsageError("clip norm must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"warmup_ratio", c.warmup_ratio}, {"batch_size", c.batch_size},
          {"grad_accum", c.grad_accum},       {"epochs", c.epochs},             {"max_seq_len", c.max_seq_len},
          {"beta1", c.beta1},                 {"beta2", c.beta2},               {"adam_eps", c.adam_eps},
          {"weight_decay", c.weight_decay},   {"clip_norm", c.clip_norm},       {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum = j.value("grad_accum", c.grad_accum);
  c.epochs = j.value("epochs", c.epochs);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

LrSchedule::LrSchedule(double peak, double warmup_ratio, std::size_t total_steps)
    : peak_(peak),
      warmup_(static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps) - 1e-9))),
      total_(total_steps) {}

double LrSchedule::at(std::size_t step) const {
  if (step >= total_) return 0.0;
  if (step < warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
  const double progress = static_cast<double>(step - warmup_) / static_cast<double>(total_ - warmup_);
  return peak_ * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParamSet& params, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), m_(params.zeros_like()),
      v_(params.zeros_like()) {}

void AdamW::step(ParamSet& params, const ParamSet& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params.tensors()) {
    const Matrix& g = grads.at(name);
    Matrix& m = m_.at(name);
    Matrix& v = v_.at(name);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p -= lr * weight_decay_ * p;
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads.tensors()) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads.tensors()) g *= s;
  }
  return norm;
}

std::string metrics_to_jsonl(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "{\"step\":%zu,\"lr\":%.9g,\"ce\":%.9g,\"focal\":%.9g,\"total\":%.9g}\n", m.step,
                m.lr, m.ce, m.focal, m.total);
  return buf;
}

RecordLoss record_loss(const Model& model, const Binding& binding, const EntitySchema& schema,
                       const TokenizedText& units, std::span<const int> unit_labels, const Matrix& raw_entities,
                       bool backward) {
  const SubwordTokenizer tok = model.tokenizer();
  const TokenizedText pieces = tok.retokenize(units);
  std::vector<int> piece_labels(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    piece_labels[i] = unit_labels[static_cast<std::size_t>(pieces.word_ids[i])];
  }
  const ForwardPass pass = forward_graph(model, binding, schema, pieces, raw_entities);
  const LossConfig& cfg = model.config().loss;
  ad::Var ce = weighted_ce_graph(pass.heads.softmax_scores, piece_labels, cfg);
  ad::Var focal = focal_graph(pass.heads.sigmoid_scores, piece_labels, cfg);
  ad::Var total = ad::add(ad::scale(ce, cfg.mix_ce), ad::scale(focal, cfg.mix_focal));
  if (backward) binding.graph().backward(total);
  return {ce.value()(0, 0), focal.value()(0, 0), total.value()(0, 0)};
}

namespace {

bool all_finite(const ParamSet& p) {
  for (const auto& [name, m] : p.tensors()) {
    if (!m.allFinite()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(Model& model, const TrainConfig& config, const Dataset& data, const EmbeddingProvider& provider,
                  EmbeddingCache& cache, const std::function<void(const StepMetrics&)>& on_step) {
  config.validate();
  if (data.records.empty()) throw DataError("training data has no records");
  const SubwordTokenizer tok = model.tokenizer();
  const int window = std::min(config.max_seq_len, model.config().backbone.max_seq_len);
  for (const DatasetRecord& r : data.records) {
    const std::size_t len =
        render_prompt(data.schema_of(r), tok.retokenize(r.text), model.prompt_template(), tok, model.render_options())
            .token_ids.size();
    if (static_cast<int>(len) > window) {
      throw DataError("record " + r.id + " renders to " + std::to_string(len) + " tokens, above the limit of " +
                      std::to_string(window));
    }
  }
  std::vector<Matrix> raw;
  for (const EntitySchema& s : data.schemas) raw.push_back(embed_schema(s, provider, cache, model.ablation().embedding_text));

  TrainResult result;
  result.backbone_checksum_before = model.backbone_checksum();
  const std::size_t n = data.records.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t micro = batch / static_cast<std::size_t>(config.grad_accum);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const LrSchedule schedule(config.learning_rate, config.warmup_ratio,
                            steps_per_epoch * static_cast<std::size_t>(config.epochs));
  AdamW opt(model.trainable(), config.beta1, config.beta2, config.adam_eps, config.weight_decay);
  ParamSet grads = model.trainable().zeros_like();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  std::size_t step = 0;

  for (int epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    rng.shuffle(order);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * batch;
      const std::size_t end = std::min(n, begin + batch);
      grads.set_zero();
      StepMetrics m;
      m.step = step;
      m.lr = schedule.at(step);
      for (std::size_t mb = begin; mb < end; mb += micro) {
        for (std::size_t k = mb; k < std::min(end, mb + micro); ++k) {
          const DatasetRecord& r = data.records[order[k]];
          ad::Graph g;
          Binding b(g);
          b.bind(model.backbone(), nullptr);
          b.bind(model.trainable(), &grads);
          const std::vector<int> labels = r.gold.class_labels(r.text.size());
          const RecordLoss l =
              record_loss(model, b, data.schema_of(r), r.text, labels, raw[r.schema_index], true);
          m.ce += l.ce;
          m.focal += l.focal;
          m.total += l.total;
        }
      }
      const double count = static_cast<double>(end - begin);
      m.ce /= count;
      m.focal /= count;
      m.total /= count;
      for (auto& [name, g] : grads.tensors()) g /= count;
      if (!std::isfinite(m.total) || !all_finite(grads)) {
        result.diverged = true;
        break;
      }
      m.grad_norm = clip_global_norm(grads, config.clip_norm);
      const ParamSet last_good = model.trainable();
      opt.step(model.trainable(), grads, m.lr);
      round_to_f32(model.trainable());
      if (!all_finite(model.trainable())) {
        model.trainable() = last_good;
        result.diverged = true;
        break;
      }
      result.metrics.push_back(m);
      if (on_step) on_step(m);
      ++step;
    }
  }
  result.backbone_checksum_after = model.backbone_checksum();
  return result;
}

Vocabulary build_vocabulary(const Dataset& data) {
  std::vector<std::string> texts = template_vocabulary_texts();
  for (const EntitySchema& s : data.schemas) {
    texts.push_back(s.o_definition);
    for (const EntityTypeDef& t : s.types) {
      texts.push_back(t.name);
      texts.push_back(t.definition);
    }
  }
  for (const DatasetRecord& r : data.records) texts.push_back(r.text.raw_text);
  return Vocabulary::build(texts, 1);
}

SweepReport sweep_lora(const std::vector<int>& ranks, const ModelConfig& base, const TrainConfig& train_config,
                       const Dataset& train_data, const Dataset& eval_data, const EmbeddingProvider& provider,
                       EmbeddingCache& cache) {
  if (ranks.empty()) throw UsageError("no LoRA ranks given");
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < 0) throw UsageError("LoRA ranks must be non-negative");
    for (std::size_t j = 0; j < i; ++j) {
      if (ranks[i] == ranks[j]) throw UsageError("duplicate LoRA rank " + std::to_string(ranks[i]));
    }
  }
  std::shared_ptr<const EmbeddingProvider> provider_ref(&provider, [](const EmbeddingProvider*) {});
  std::shared_ptr<EmbeddingCache> cache_ref(&cache, [](EmbeddingCache*) {});
  const Vocabulary vocab = build_vocabulary(train_data);
  SweepReport report;
  for (int r : ranks) {
    ModelConfig cfg = base;
    cfg.backbone.vocab_size = 0;
    cfg.lora.rank = r;
    cfg.lora.alpha = 2.0 * r;
    auto model = std::make_shared<Model>(Model::create(cfg, vocab));
    train(*model, train_config, train_data, provider, cache);
    const Engine engine(model, provider_ref, cache_ref);
    const EvalOutcome e = engine.evaluate(eval_data);
    report.rows.push_back({r, e.token_prf.f1, e.report.micro.f1, e.ambiguous_accuracy()});
  }
  std::vector<SweepRow> sorted = report.rows;
  std::sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.rank < b.rank; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].token_f1 < sorted[i - 1].token_f1) report.non_decreasing = false;
  }
  char line[160];
  report.summary = "rank  token_f1  span_f1  ambiguous_acc\n";
  for (const SweepRow& row : sorted) {
    std::snprintf(line, sizeof(line), "%4d  %8.4f  %7.4f  %13.4f\n", row.rank, row.token_f1, row.span_f1,
                  row.ambiguous_accuracy);
    report.summary += line;
  }
  report.summary += report.non_decreasing ? "token F1 is non-decreasing in rank\n"
                                          : "token F1 is NOT monotone in rank\n";
  return report;
}

}  // namespace jpt
