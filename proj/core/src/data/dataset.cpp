#include "jpt/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt {

std::vector<BioLabel> GoldAnnotation::bio_labels(std::size_t num_tokens) const {
  std::vector<BioLabel> labels(num_tokens);
  for (const TokenSpan& s : spans) {
    for (int t = s.start; t < s.end; ++t) {
      labels[static_cast<std::size_t>(t)] = {t == s.start ? BioTag::kBegin : BioTag::kInside, s.type};
    }
  }
  return labels;
}

std::vector<int> GoldAnnotation::class_labels(std::size_t num_tokens) const {
  std::vector<int> labels(num_tokens, 0);
  for (const TokenSpan& s : spans) {
    for (int t = s.start; t < s.end; ++t) labels[static_cast<std::size_t>(t)] = s.type;
  }
  return labels;
}

GoldAnnotation GoldAnnotation::from_bio(const std::vector<BioLabel>& labels) {
  GoldAnnotation out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const BioLabel& l = labels[i];
    if (l.tag == BioTag::kOutside) continue;
    const bool continues = l.tag == BioTag::kInside && !out.spans.empty() &&
                           out.spans.back().end == static_cast<int>(i) && out.spans.back().type == l.type;
    if (continues) {
      ++out.spans.back().end;
    } else {
      out.spans.push_back({static_cast<int>(i), static_cast<int>(i) + 1, l.type});
    }
  }
  return out;
}

void validate_spans(const std::vector<TokenSpan>& spans, std::size_t num_tokens, std::size_t num_types) {
  int prev_end = 0;
  for (const TokenSpan& s : spans) {
    if (s.start < 0 || s.end <= s.start || static_cast<std::size_t>(s.end) > num_tokens) {
      throw DataError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") is out of range");
    }
    if (s.type < 1 || static_cast<std::size_t>(s.type) > num_types) {
      throw DataError("span type index " + std::to_string(s.type) + " is out of range");
    }
    if (s.start < prev_end) {
      throw DataError("spans overlap or are unsorted at [" + std::to_string(s.start) + "," +
                      std::to_string(s.end) + ")");
    }
    prev_end = s.end;
  }
}

std::size_t Dataset::intern_schema(const EntitySchema& schema) {
  for (std::size_t i = 0; i < schemas.size(); ++i) {
    if (schemas[i] == schema) return i;
  }
  schemas.push_back(schema);
  return schemas.size() - 1;
}

void apply_schema_definitions(Dataset& dataset, const EntitySchema& schema) {
  for (EntitySchema& s : dataset.schemas) {
    for (EntityTypeDef& t : s.types) {
      auto cls = schema.class_of(t.name);
      if (!cls) throw DataError("schema has no definition for type '" + t.name + "'");
      t.definition = schema.types[static_cast<std::size_t>(*cls) - 1].definition;
    }
    s.o_definition = schema.o_definition;
  }
}

// --- CoNLL --------------------------------------------------------------------

namespace {

struct ConllLine {
  std::string token;
  std::string middle;
  std::string tag;
};

// Splits "tok<ws>...<ws>TAG" keeping the exact bytes between token and tag.
ConllLine split_conll_line(const std::string& line, std::size_t line_no, const std::string& source) {
  auto is_ws = [](char c) { return c == ' ' || c == '\t'; };
  std::size_t tok_end = 0;
  while (tok_end < line.size() && !is_ws(line[tok_end])) ++tok_end;
  std::size_t tag_start = line.size();
  while (tag_start > 0 && !is_ws(line[tag_start - 1])) --tag_start;
  if (tok_end == 0 || tag_start <= tok_end || tag_start == line.size()) {
    throw DataError(source + ":" + std::to_string(line_no) + ": expected at least a token and a tag column");
  }
  return {line.substr(0, tok_end), line.substr(tok_end, tag_start - tok_end), line.substr(tag_start)};
}

}  // namespace

Dataset parse_conll(const std::string& content, const std::string& source) {
  Dataset dataset;
  EntitySchema schema;
  std::vector<std::vector<std::pair<ConllLine, std::size_t>>> sentences(1);

  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
    if (blank) {
      if (!sentences.back().empty()) sentences.emplace_back();
      continue;
    }
    sentences.back().push_back({split_conll_line(line, line_no, source), line_no});
  }
  if (sentences.back().empty()) sentences.pop_back();

  // First pass: collect types in order of first appearance.
  for (const auto& sentence : sentences) {
    for (const auto& [cl, no] : sentence) {
      const std::string& tag = cl.tag;
      if (tag == "O") continue;
      if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
        throw DataError(source + ":" + std::to_string(no) + ": malformed tag '" + tag + "'");
      }
      const std::string type = tag.substr(2);
      if (!schema.class_of(type)) schema.types.push_back({type, type});
    }
  }

  std::size_t schema_index = 0;
  if (!schema.types.empty()) {
    schema.validate();
    schema_index = dataset.intern_schema(schema);
  } else {
    dataset.schemas.push_back(schema);
  }

  std::size_t sentence_no = 0;
  for (const auto& sentence : sentences) {
    DatasetRecord record;
    record.id = source + "#" + std::to_string(sentence_no++);
    record.schema_index = schema_index;
    std::vector<std::string> words;
    std::vector<BioLabel> labels;
    for (const auto& [cl, no] : sentence) {
      words.push_back(cl.token);
      record.conll_middle.push_back(cl.middle);
      if (cl.tag == "O") {
        labels.push_back({});
        continue;
      }
      const int type = *schema.class_of(cl.tag.substr(2));
      BioTag tag = cl.tag[0] == 'B' ? BioTag::kBegin : BioTag::kInside;
      if (tag == BioTag::kInside && (labels.empty() || labels.back().type != type)) {
        tag = BioTag::kBegin;  // orphan I- tag
        ++dataset.repairs;
      }
      labels.push_back({tag, type});
    }
    record.text = from_words(words);
    record.gold = GoldAnnotation::from_bio(labels);
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

Dataset read_conll(const std::string& path) { return parse_conll(binio::read_file(path), path); }

std::string format_conll(const Dataset& dataset) {
  std::string out;
  for (const DatasetRecord& r : dataset.records) {
    const EntitySchema& schema = dataset.schema_of(r);
    const auto labels = r.gold.bio_labels(r.text.size());
    for (std::size_t i = 0; i < r.text.size(); ++i) {
      out += r.text.tokens[i];
      out += i < r.conll_middle.size() ? r.conll_middle[i] : std::string("\t");
      const BioLabel& l = labels[i];
      if (l.tag == BioTag::kOutside) {
        out += "O";
      } else {
        out += l.tag == BioTag::kBegin ? "B-" : "I-";
        out += schema.name_of(l.type);
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll(const Dataset& dataset, const std::string& path) {
  binio::write_file(path, format_conll(dataset));
}

// --- JSONL --------------------------------------------------------------------

Dataset parse_jsonl(const std::string& content, const std::string& source) {
  Dataset dataset;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
      throw DataError(where + ": record needs a string 'text'");
    }
    if (!j.contains("entity_types")) throw DataError(where + ": record needs 'entity_types'");
    EntitySchema schema;
    try {
      nlohmann::json sj = {{"types", j.at("entity_types")}};
      if (j.contains("o_definition")) sj["o_definition"] = j.at("o_definition");
      schema = schema_from_json(sj);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }

    DatasetRecord record;
    record.id = j.contains("id") && j.at("id").is_string() ? j.at("id").get<std::string>() : where;
    record.text = pre_tokenize(j.at("text").get<std::string>());
    record.schema_index = dataset.intern_schema(schema);
    const TokenizedText& text = record.text;

    auto token_starting_at = [&](std::size_t offset) -> std::optional<int> {
      for (std::size_t t = 0; t < text.size(); ++t) {
        if (text.char_spans[t].start == offset) return static_cast<int>(t);
      }
      return std::nullopt;
    };
    auto token_ending_at = [&](std::size_t offset) -> std::optional<int> {
      for (std::size_t t = 0; t < text.size(); ++t) {
        if (text.char_spans[t].end == offset) return static_cast<int>(t);
      }
      return std::nullopt;
    };
    auto token_containing = [&](std::size_t offset) -> std::optional<int> {
      for (std::size_t t = 0; t < text.size(); ++t) {
        if (text.char_spans[t].start < offset && offset < text.char_spans[t].end) return static_cast<int>(t);
      }
      return std::nullopt;
    };

    const nlohmann::json spans = j.value("spans", nlohmann::json::array());
    if (!spans.is_array()) throw DataError(where + ": 'spans' must be an array");
    for (const auto& s : spans) {
      if (!s.is_object() || !s.contains("start") || !s.contains("end") || !s.contains("type") ||
          !s.at("start").is_number_integer() || !s.at("end").is_number_integer() || !s.at("type").is_string()) {
        throw DataError(where + ": span needs integer 'start', 'end' and string 'type'");
      }
      const auto start = s.at("start").get<long long>();
      const auto end = s.at("end").get<long long>();
      const std::string type_name = s.at("type").get<std::string>();
      if (start < 0 || end <= start || static_cast<std::size_t>(end) > text.raw_text.size()) {
        throw DataError(where + ": span offsets [" + std::to_string(start) + "," + std::to_string(end) +
                        ") out of range for text of length " + std::to_string(text.raw_text.size()));
      }
      auto cls = schema.class_of(type_name);
      if (!cls) throw DataError(where + ": span type '" + type_name + "' is not in the record's entity_types");
      for (auto offset : {static_cast<std::size_t>(start), static_cast<std::size_t>(end)}) {
        if (auto inside = token_containing(offset)) {
          throw DataError(where + ": span boundary " + std::to_string(offset) + " falls inside token '" +
                          text.tokens[static_cast<std::size_t>(*inside)] + "'");
        }
      }
      auto first = token_starting_at(static_cast<std::size_t>(start));
      auto last = token_ending_at(static_cast<std::size_t>(end));
      if (!first || !last || *last < *first) {
        throw DataError(where + ": span [" + std::to_string(start) + "," + std::to_string(end) +
                        ") does not cover whole tokens");
      }
      record.gold.spans.push_back({*first, *last + 1, *cls});
    }
    std::sort(record.gold.spans.begin(), record.gold.spans.end());
    try {
      validate_spans(record.gold.spans, text.size(), schema.num_types());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }

    if (j.contains("ambiguous")) {
      record.ambiguous.assign(text.size(), false);
      for (const auto& idx : j.at("ambiguous")) {
        if (!idx.is_number_integer() || idx.get<long long>() < 0 ||
            static_cast<std::size_t>(idx.get<long long>()) >= text.size()) {
          throw DataError(where + ": 'ambiguous' holds an invalid token index");
        }
        record.ambiguous[idx.get<std::size_t>()] = true;
      }
    }
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

Dataset read_jsonl(const std::string& path) { return parse_jsonl(binio::read_file(path), path); }

Dataset read_dataset(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".jsonl" || ext == ".json") return read_jsonl(path);
  return read_conll(path);
}

std::string format_jsonl(const Dataset& dataset) {
  std::string out;
  for (const DatasetRecord& r : dataset.records) {
    const EntitySchema& schema = dataset.schema_of(r);
    nlohmann::json j;
    j["id"] = r.id;
    j["text"] = r.text.raw_text;
    j["entity_types"] = schema_to_json(schema).at("types");
    if (schema.o_definition != kDefaultODefinition) j["o_definition"] = schema.o_definition;
    nlohmann::json spans = nlohmann::json::array();
    for (const TokenSpan& s : r.gold.spans) {
      spans.push_back({{"start", r.text.char_spans[static_cast<std::size_t>(s.start)].start},
                       {"end", r.text.char_spans[static_cast<std::size_t>(s.end) - 1].end},
                       {"type", schema.name_of(s.type)}});
    }
    j["spans"] = std::move(spans);
    if (!r.ambiguous.empty()) {
      nlohmann::json idx = nlohmann::json::array();
      for (std::size_t t = 0; t < r.ambiguous.size(); ++t) {
        if (r.ambiguous[t]) idx.push_back(t);
      }
      j["ambiguous"] = std::move(idx);
    }
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

}  // namespace jpt
