#include "jpt/service/engine.hpp"

#include <chrono>
#include <map>

#include "jpt/util/error.hpp"

namespace jpt {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
}

TokenizedText slice_units(const TokenizedText& units, std::size_t begin, std::size_t end) {
  TokenizedText out;
  const std::size_t base = units.char_spans[begin].start;
  out.raw_text = units.raw_text.substr(base, units.char_spans[end - 1].end - base);
  const int word0 = units.word_ids[begin];
  for (std::size_t i = begin; i < end; ++i) {
    out.tokens.push_back(units.tokens[i]);
    out.char_spans.push_back({units.char_spans[i].start - base, units.char_spans[i].end - base});
    out.word_ids.push_back(units.word_ids[i] - word0);
  }
  return out;
}

}  // namespace

Engine::Engine(std::shared_ptr<const Model> model, std::shared_ptr<const EmbeddingProvider> provider,
               std::shared_ptr<EmbeddingCache> cache, std::shared_ptr<const SequenceEncoder> encoder)
    : model_(std::move(model)),
      provider_(std::move(provider)),
      cache_(std::move(cache)),
      encoder_(std::move(encoder)) {
  if (!model_ || !provider_ || !cache_) throw ModelError("engine needs a model, a provider and a cache");
  if (provider_->dim() != model_->config().d_enc) {
    throw ModelError("embedding provider gives " + std::to_string(provider_->dim()) +
                     " dimensions but the model expects d_enc = " + std::to_string(model_->config().d_enc));
  }
  if (!encoder_) encoder_ = model_->make_encoder();
  if (encoder_->hidden_size() != model_->config().backbone.d_model) {
    throw ModelError("backbone hidden size does not match the token projection input");
  }
}

nlohmann::json predict_to_json(const PredictResult& result, const EntitySchema& schema, bool include_probs) {
  nlohmann::json spans = nlohmann::json::array();
  for (const PredictedSpan& s : result.spans) {
    spans.push_back({{"start", s.start},
                     {"end", s.end},
                     {"char_start", s.char_start},
                     {"char_end", s.char_end},
                     {"type", s.type_name},
                     {"text", s.text},
                     {"score", s.score}});
  }
  nlohmann::json labels = nlohmann::json::array();
  for (int c : result.unit_predictions.labels) labels.push_back(schema.name_of(c));
  nlohmann::json out = {{"schema_id", schema.id()}, {"tokens", result.units.tokens}, {"labels", labels}, {"spans", spans}};
  if (include_probs) {
    nlohmann::json probs = nlohmann::json::array();
    const Matrix& p = result.unit_predictions.probs;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < p.cols(); ++j) row.push_back(p(i, j));
      probs.push_back(std::move(row));
    }
    out["probs"] = std::move(probs);
  }
  return out;
}

Matrix Engine::raw_entities(const EntitySchema& schema) const {
  return embed_schema(schema, *provider_, *cache_, model_->ablation().embedding_text);
}

std::size_t Engine::rendered_length(const TokenizedText& units, const EntitySchema& schema) const {
  const SubwordTokenizer tok = model_->tokenizer();
  return render_prompt(schema, tok.retokenize(units), model_->prompt_template(), tok, model_->render_options())
      .token_ids.size();
}

PredictResult Engine::predict(const std::string& text, const EntitySchema& schema,
                              const PredictOptions& options) const {
  return predict_units(pre_tokenize(text), schema, options);
}

PredictResult Engine::predict_units(const TokenizedText& units, const EntitySchema& schema,
                                    const PredictOptions& options) const {
  schema.validate();
  if (units.empty()) throw DataError("empty input");
  const Clock::time_point t0 = Clock::now();

  const SubwordTokenizer tok = model_->tokenizer();
  const TokenizedText pieces = tok.retokenize(units);
  const PromptRender render =
      render_prompt(schema, pieces, model_->prompt_template(), tok, model_->render_options());
  if (static_cast<int>(render.token_ids.size()) > encoder_->max_seq_len()) {
    throw DataError("input needs " + std::to_string(render.token_ids.size()) +
                    " tokens after duplication but the backbone accepts " +
                    std::to_string(encoder_->max_seq_len()) + "; split the text into chunks (jpt predict --chunk)");
  }
  const Clock::time_point t1 = Clock::now();

  const bool want_attention = options.return_attention;
  if (want_attention && render.second_pass_positions.empty()) {
    throw UsageError("attention roll-up needs a model trained with duplication");
  }
  const EncoderOutput encoded = encoder_->encode(render.token_ids, want_attention);
  const Clock::time_point t2 = Clock::now();

  const Matrix raw = raw_entities(schema);
  ad::Graph g;
  Binding b(g);
  b.bind(model_->trainable(), nullptr);
  const ClassifierGraph heads = classifier_forward(
      b, g.constant(extract_second_pass(encoded.hidden, render.classified_positions())), g.constant(raw));
  const TokenPredictions piece_preds =
      ensemble(softmax_probs(heads.softmax_scores.value()), sigmoid_head_distribution(heads.sigmoid_scores.value()));
  const Clock::time_point t3 = Clock::now();

  PredictResult out;
  out.units = units;
  out.unit_predictions = align_to_words(piece_preds, pieces.word_ids, model_->config().align);
  for (const EntitySpan& s : merge_spans(out.unit_predictions)) {
    PredictedSpan p;
    p.start = s.start;
    p.end = s.end;
    p.char_start = units.char_spans[static_cast<std::size_t>(s.start)].start;
    p.char_end = units.char_spans[static_cast<std::size_t>(s.end - 1)].end;
    p.type = s.type;
    p.type_name = schema.name_of(s.type);
    p.text = units.raw_text.substr(p.char_start, p.char_end - p.char_start);
    p.score = s.score;
    out.spans.push_back(std::move(p));
  }
  if (want_attention) {
    out.attention = attention_rollup(encoded, render.second_pass_positions, render.first_pass_positions);
    out.attention_labels = pieces.tokens;
  }
  const Clock::time_point t4 = Clock::now();
  out.timing = {micros(t0, t1), micros(t1, t2), micros(t2, t3), micros(t3, t4), micros(t0, t4)};
  return out;
}

PredictResult Engine::predict_chunked(const std::string& text, const EntitySchema& schema,
                                      const PredictOptions& options) const {
  const TokenizedText units = pre_tokenize(text);
  if (units.empty()) throw DataError("empty input");
  const auto limit = static_cast<std::size_t>(encoder_->max_seq_len());
  PredictResult merged;
  merged.units = units;
  merged.unit_predictions.probs.resize(static_cast<Eigen::Index>(units.size()),
                                       static_cast<Eigen::Index>(schema.num_classes()));
  std::size_t begin = 0;
  while (begin < units.size()) {
    // Largest end (by bisection) whose rendering fits.
    std::size_t lo = begin + 1;
    std::size_t hi = units.size();
    if (rendered_length(slice_units(units, begin, lo), schema) > limit) {
      throw DataError("a single token does not fit the backbone window; raise max_seq_len");
    }
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      if (rendered_length(slice_units(units, begin, mid), schema) <= limit) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    PredictOptions chunk_options = options;
    chunk_options.return_attention = false;
    const PredictResult part = predict_units(slice_units(units, begin, lo), schema, chunk_options);
    const std::size_t base = units.char_spans[begin].start;
    for (PredictedSpan s : part.spans) {
      s.start += static_cast<int>(begin);
      s.end += static_cast<int>(begin);
      s.char_start += base;
      s.char_end += base;
      merged.spans.push_back(std::move(s));
    }
    merged.unit_predictions.labels.insert(merged.unit_predictions.labels.end(),
                                          part.unit_predictions.labels.begin(), part.unit_predictions.labels.end());
    merged.unit_predictions.probs.middleRows(static_cast<Eigen::Index>(begin),
                                             static_cast<Eigen::Index>(lo - begin)) = part.unit_predictions.probs;
    merged.timing.render_us += part.timing.render_us;
    merged.timing.encode_us += part.timing.encode_us;
    merged.timing.classify_us += part.timing.classify_us;
    merged.timing.decode_us += part.timing.decode_us;
    merged.timing.total_us += part.timing.total_us;
    begin = lo;
  }
  return merged;
}

EvalOutcome Engine::evaluate(const Dataset& dataset) const {
  if (dataset.records.empty()) throw DataError("dataset has no records");
  // Types are pooled by name across record schemas.
  std::vector<std::string> names{"O"};
  std::map<std::string, int> global;
  std::vector<std::vector<int>> remap(dataset.schemas.size());
  for (std::size_t s = 0; s < dataset.schemas.size(); ++s) {
    remap[s].push_back(0);
    for (const EntityTypeDef& t : dataset.schemas[s].types) {
      const std::string key = to_lower_ascii(t.name);
      auto [it, inserted] = global.emplace(key, static_cast<int>(names.size()));
      if (inserted) names.push_back(t.name);
      remap[s].push_back(it->second);
    }
  }
  Evaluator evaluator(names);
  EvalOutcome out;
  for (const DatasetRecord& r : dataset.records) {
    const EntitySchema& schema = dataset.schema_of(r);
    const PredictResult p = predict_units(r.text, schema);
    const std::vector<int>& map = remap[r.schema_index];
    auto to_global = [&](std::vector<TokenSpan> spans) {
      for (TokenSpan& s : spans) s.type = map[static_cast<std::size_t>(s.type)];
      return spans;
    };
    std::vector<int> pred_labels = p.unit_predictions.labels;
    std::vector<int> gold_labels = r.gold.class_labels(r.text.size());
    for (int& l : pred_labels) l = map[static_cast<std::size_t>(l)];
    for (int& l : gold_labels) l = map[static_cast<std::size_t>(l)];
    std::vector<TokenSpan> pred_spans;
    for (const PredictedSpan& s : p.spans) pred_spans.push_back({s.start, s.end, s.type});
    const auto cases = evaluator.add(to_global(pred_spans), to_global(r.gold.spans), pred_labels, gold_labels);
    for (const ErrorCase& c : cases) {
      if (c.bucket != ErrorBucket::kExact) out.error_lines.push_back(error_case_to_jsonl(c, r.id, r.text, names));
    }
    for (std::size_t i = 0; i < gold_labels.size(); ++i) {
      if (pred_labels[i] != 0) ++out.token_prf.predicted;
      if (gold_labels[i] != 0) ++out.token_prf.gold;
      if (pred_labels[i] != 0 && pred_labels[i] == gold_labels[i]) ++out.token_prf.tp;
      if (i < r.ambiguous.size() && r.ambiguous[i]) {
        ++out.ambiguous_tokens;
        if (pred_labels[i] == gold_labels[i]) ++out.ambiguous_correct;
      }
    }
  }
  out.report = evaluator.report();
  out.token_prf.finalize();
  return out;
}

}  // namespace jpt
