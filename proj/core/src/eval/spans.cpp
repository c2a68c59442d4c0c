#include "jpt/eval/spans.hpp"

#include <algorithm>
#include <cstdio>

#include "jpt/util/error.hpp"

namespace jpt {

std::vector<EntitySpan> merge_spans(std::span<const int> labels) {
  std::vector<EntitySpan> out;
  const int n = static_cast<int>(labels.size());
  int i = 0;
  while (i < n) {
    const int type = labels[static_cast<std::size_t>(i)];
    if (type == 0) {
      ++i;
      continue;
    }
    int j = i + 1;
    while (j < n && labels[static_cast<std::size_t>(j)] == type) ++j;
    out.push_back({i, j, type, 0.0});
    i = j;
  }
  return out;
}

std::vector<EntitySpan> merge_spans(const TokenPredictions& preds) {
  std::vector<EntitySpan> out = merge_spans(std::span<const int>(preds.labels));
  if (preds.probs.rows() == static_cast<Eigen::Index>(preds.labels.size())) {
    for (EntitySpan& s : out) {
      double sum = 0.0;
      for (int t = s.start; t < s.end; ++t) sum += preds.probs(t, s.type);
      s.score = sum / (s.end - s.start);
    }
  }
  return out;
}

std::vector<TokenSpan> to_token_spans(const std::vector<EntitySpan>& spans) {
  std::vector<TokenSpan> out;
  out.reserve(spans.size());
  for (const EntitySpan& s : spans) out.push_back(s.token_span());
  return out;
}

std::vector<int> spans_to_labels(const std::vector<TokenSpan>& spans, std::size_t num_tokens) {
  std::vector<int> labels(num_tokens, 0);
  for (const TokenSpan& s : spans) {
    if (s.start < 0 || s.end > static_cast<int>(num_tokens) || s.start >= s.end) {
      throw DataError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) + ") is out of range");
    }
    for (int t = s.start; t < s.end; ++t) labels[static_cast<std::size_t>(t)] = s.type;
  }
  return labels;
}

AlignPolicy parse_align_policy(const std::string& name) {
  if (name == "first" || name == "first_subword") return AlignPolicy::kFirstSubword;
  if (name == "majority") return AlignPolicy::kMajority;
  throw UsageError("unknown alignment policy '" + name + "' (expected first_subword or majority)");
}

namespace {

// [begin, end) piece ranges per word.
std::vector<std::pair<int, int>> word_ranges(std::span<const int> word_ids) {
  std::vector<std::pair<int, int>> ranges;
  for (std::size_t i = 0; i < word_ids.size(); ++i) {
    const int w = word_ids[i];
    if (w == static_cast<int>(ranges.size())) {
      ranges.push_back({static_cast<int>(i), static_cast<int>(i) + 1});
    } else if (!ranges.empty() && w == static_cast<int>(ranges.size()) - 1) {
      ranges.back().second = static_cast<int>(i) + 1;
    } else {
      throw DataError("word ids must start at 0 and increase by at most one per piece");
    }
  }
  return ranges;
}

int majority_label(std::span<const int> labels) {
  int best = labels[0];
  std::size_t best_count = 0;
  for (int candidate : labels) {
    const auto count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), candidate));
    if (count > best_count || (count == best_count && candidate < best)) {
      best = candidate;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

std::vector<int> align_to_words(std::span<const int> labels, std::span<const int> word_ids, AlignPolicy policy) {
  if (labels.size() != word_ids.size()) throw DataError("label and word-id counts differ");
  std::vector<int> out;
  for (auto [b, e] : word_ranges(word_ids)) {
    out.push_back(policy == AlignPolicy::kFirstSubword
                      ? labels[static_cast<std::size_t>(b)]
                      : majority_label(labels.subspan(static_cast<std::size_t>(b), static_cast<std::size_t>(e - b))));
  }
  return out;
}

TokenPredictions align_to_words(const TokenPredictions& preds, std::span<const int> word_ids, AlignPolicy policy) {
  TokenPredictions out;
  out.labels = align_to_words(std::span<const int>(preds.labels), word_ids, policy);
  const auto ranges = word_ranges(word_ids);
  out.probs.resize(static_cast<Eigen::Index>(ranges.size()), preds.probs.cols());
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    const auto [b, e] = ranges[w];
    if (policy == AlignPolicy::kFirstSubword) {
      out.probs.row(static_cast<Eigen::Index>(w)) = preds.probs.row(b);
    } else {
      out.probs.row(static_cast<Eigen::Index>(w)) = preds.probs.middleRows(b, e - b).colwise().mean();
    }
  }
  return out;
}

void Prf::finalize() {
  precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  recall = gold > 0 ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

const char* bucket_name(ErrorBucket b) {
  switch (b) {
    case ErrorBucket::kExact:
      return "exact";
    case ErrorBucket::kTypeConfusion:
      return "type_confusion";
    case ErrorBucket::kOverExtension:
      return "over_extension";
    case ErrorBucket::kTruncation:
      return "truncation";
    case ErrorBucket::kPartialOverlap:
      return "partial_overlap";
    case ErrorBucket::kMissed:
      return "missed";
    case ErrorBucket::kSpurious:
      return "spurious";
  }
  return "?";
}

namespace {

void check_flat(const std::vector<TokenSpan>& spans, const char* which) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start >= spans[i].end) throw DataError(std::string(which) + " spans contain an empty span");
    if (i > 0 && spans[i].start < spans[i - 1].end) {
      throw DataError(std::string(which) + " spans overlap or are unsorted");
    }
  }
}

bool overlaps(const TokenSpan& a, const TokenSpan& b) { return a.start < b.end && b.start < a.end; }
bool same_bounds(const TokenSpan& a, const TokenSpan& b) { return a.start == b.start && a.end == b.end; }
bool contains(const TokenSpan& outer, const TokenSpan& inner) {
  return outer.start <= inner.start && inner.end <= outer.end && !same_bounds(outer, inner);
}

}  // namespace

std::vector<ErrorCase> categorize_errors(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold) {
  check_flat(pred, "predicted");
  check_flat(gold, "gold");
  std::vector<bool> used_pred(pred.size(), false);
  std::vector<bool> used_gold(gold.size(), false);
  std::vector<ErrorCase> cases;

  auto pass = [&](ErrorBucket bucket, auto matches) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (used_gold[g]) continue;
      for (std::size_t p = 0; p < pred.size(); ++p) {
        if (used_pred[p] || !matches(pred[p], gold[g])) continue;
        used_gold[g] = used_pred[p] = true;
        cases.push_back({bucket, gold[g], pred[p]});
        break;
      }
    }
  };
  pass(ErrorBucket::kExact, [](const TokenSpan& p, const TokenSpan& g) { return p == g; });
  pass(ErrorBucket::kTypeConfusion,
       [](const TokenSpan& p, const TokenSpan& g) { return same_bounds(p, g) && p.type != g.type; });
  pass(ErrorBucket::kOverExtension,
       [](const TokenSpan& p, const TokenSpan& g) { return p.type == g.type && contains(p, g); });
  pass(ErrorBucket::kTruncation,
       [](const TokenSpan& p, const TokenSpan& g) { return p.type == g.type && contains(g, p); });
  pass(ErrorBucket::kPartialOverlap, [](const TokenSpan& p, const TokenSpan& g) { return overlaps(p, g); });
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (!used_gold[g]) cases.push_back({ErrorBucket::kMissed, gold[g], std::nullopt});
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!used_pred[p]) cases.push_back({ErrorBucket::kSpurious, std::nullopt, pred[p]});
  }
  return cases;
}

ConfusionMatrix confusion_matrix(std::span<const int> token_pred, std::span<const int> token_gold,
                                 std::size_t num_classes) {
  if (token_pred.size() != token_gold.size()) {
    throw DataError("confusion matrix: " + std::to_string(token_pred.size()) + " predictions vs " +
                    std::to_string(token_gold.size()) + " gold labels");
  }
  ConfusionMatrix m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < token_pred.size(); ++i) {
    const int g = token_gold[i];
    const int p = token_pred[i];
    if (g < 0 || p < 0 || g >= static_cast<int>(num_classes) || p >= static_cast<int>(num_classes)) {
      throw DataError("confusion matrix: label outside 0.." + std::to_string(num_classes - 1));
    }
    ++m[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
  }
  return m;
}

Evaluator::Evaluator(std::vector<std::string> class_names) {
  if (class_names.size() < 2) throw DataError("empty schema");
  acc_.class_names = std::move(class_names);
  acc_.per_type.resize(acc_.class_names.size() - 1);
  acc_.confusion.assign(acc_.class_names.size(), std::vector<std::size_t>(acc_.class_names.size(), 0));
}

std::vector<ErrorCase> Evaluator::add(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold,
                                      std::span<const int> token_pred, std::span<const int> token_gold) {
  const std::size_t n_types = acc_.per_type.size();
  for (const auto* list : {&pred, &gold}) {
    for (const TokenSpan& s : *list) {
      if (s.type < 1 || s.type > static_cast<int>(n_types)) {
        throw DataError("span type " + std::to_string(s.type) + " outside 1.." + std::to_string(n_types));
      }
    }
  }
  std::vector<ErrorCase> cases = categorize_errors(pred, gold);
  for (const ErrorCase& c : cases) ++acc_.buckets[static_cast<std::size_t>(c.bucket)];
  for (const TokenSpan& s : pred) {
    ++acc_.micro.predicted;
    ++acc_.per_type[static_cast<std::size_t>(s.type - 1)].predicted;
  }
  for (const TokenSpan& s : gold) {
    ++acc_.micro.gold;
    ++acc_.per_type[static_cast<std::size_t>(s.type - 1)].gold;
  }
  // Exact matches are the true positives; spans are flat so greedy and
  // optimal matching agree.
  for (const ErrorCase& c : cases) {
    if (c.bucket != ErrorBucket::kExact) continue;
    ++acc_.micro.tp;
    ++acc_.per_type[static_cast<std::size_t>(c.gold->type - 1)].tp;
  }
  if (!token_pred.empty() || !token_gold.empty()) {
    const ConfusionMatrix m = confusion_matrix(token_pred, token_gold, acc_.class_names.size());
    for (std::size_t g = 0; g < m.size(); ++g) {
      for (std::size_t p = 0; p < m.size(); ++p) acc_.confusion[g][p] += m[g][p];
    }
  }
  ++acc_.records;
  return cases;
}

EvalReport Evaluator::report() const {
  EvalReport r = acc_;
  r.micro.finalize();
  for (Prf& p : r.per_type) p.finalize();
  r.empty = r.micro.gold == 0 && r.micro.predicted == 0;
  return r;
}

EvalReport evaluate(const std::vector<TokenSpan>& pred, const std::vector<TokenSpan>& gold, std::size_t num_types) {
  std::vector<std::string> names{"O"};
  for (std::size_t k = 1; k <= num_types; ++k) names.push_back("TYPE" + std::to_string(k));
  Evaluator e(std::move(names));
  e.add(pred, gold);
  return e.report();
}

namespace {

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"tp", p.tp},               {"predicted", p.predicted}, {"gold", p.gold}};
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json per_type = nlohmann::json::object();
  for (std::size_t k = 0; k < report.per_type.size(); ++k) {
    per_type[report.class_names[k + 1]] = prf_json(report.per_type[k]);
  }
  nlohmann::json buckets = nlohmann::json::object();
  for (std::size_t b = 0; b < kNumErrorBuckets; ++b) buckets[bucket_name(static_cast<ErrorBucket>(b))] = report.buckets[b];
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t g = 0; g < report.confusion.size(); ++g) {
    for (std::size_t p = 0; p < report.confusion.size(); ++p) {
      total += report.confusion[g][p];
      if (g == p) correct += report.confusion[g][p];
    }
  }
  return {{"records", report.records},
          {"empty", report.empty},
          {"micro", prf_json(report.micro)},
          {"per_type", per_type},
          {"classes", report.class_names},
          {"confusion", report.confusion},
          {"token_accuracy", total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0},
          {"errors", buckets}};
}

std::string confusion_to_csv(const EvalReport& report) {
  std::string out = "gold\\pred";
  for (const auto& n : report.class_names) out += "," + n;
  out += "\n";
  for (std::size_t g = 0; g < report.confusion.size(); ++g) {
    out += report.class_names[g];
    for (std::size_t p = 0; p < report.confusion.size(); ++p) out += "," + std::to_string(report.confusion[g][p]);
    out += "\n";
  }
  return out;
}

std::string error_case_to_jsonl(const ErrorCase& c, const std::string& record_id, const TokenizedText& text,
                                const std::vector<std::string>& class_names) {
  auto span_json = [&](const std::optional<TokenSpan>& s) -> nlohmann::json {
    if (!s) return nullptr;
    const std::size_t b = text.char_spans.at(static_cast<std::size_t>(s->start)).start;
    const std::size_t e = text.char_spans.at(static_cast<std::size_t>(s->end - 1)).end;
    return {{"start", s->start},
            {"end", s->end},
            {"type", class_names.at(static_cast<std::size_t>(s->type))},
            {"text", text.raw_text.substr(b, e - b)}};
  };
  nlohmann::json j = {{"id", record_id},
                      {"bucket", bucket_name(c.bucket)},
                      {"gold", span_json(c.gold)},
                      {"pred", span_json(c.pred)},
                      {"sentence", text.raw_text}};
  return j.dump() + "\n";
}

}  // namespace jpt
