#include "jpt/encoder/prompt.hpp"

#include "jpt/util/error.hpp"

namespace jpt {

PromptTemplate PromptTemplate::standard() {
  PromptTemplate t;
  t.name = "standard";
  t.system_text =
      "You are an information-extraction assistant.\n"
      "Task: Perform Named Entity Recognition (NER) on the user-supplied text.\n"
      "The user will give you the supported entity types and their definitions.\n"
      "You will read the types and definitions to understand what each entity type means.\n"
      "The user will give you the text twice in the format \"The first time: 'actual text' The second time: "
      "'actual text'\".\n"
      "Output Format: Output ONE annotated text with entities as <entity_text, ENTITY_TYPE>\n"
      "Rules:\n"
      "(1) Keep multi-word entities together;\n"
      "(2) Only use provided types;\n"
      "(3) Output once;\n"
      "(4) No bare-noun labelling (e.g., don't label \"museum\" unless part of proper name);\n"
      "(5) Output types exactly as listed;\n"
      "(6) Only label if clearly matches definition.";
  t.schema_turn_template = "Supported entity types ({count}): {names}\nEntity type definitions:\n{definitions}";
  t.schema_turn_names_only_template = "Supported entity types ({count}): {names}";
  t.definition_line_template = "- \"{name}\": \"{definition}\"";
  t.assistant_ack_text =
      "I have read the definitions. Please provide the text in the format 'The first time: <text> The second "
      "time: <text>'";
  t.duplicated_turn_template = "The first time: '{text}' The second time: '{text}'";
  t.single_turn_template = "The first time: '{text}'";
  return t;
}

PromptTemplate PromptTemplate::compact() {
  PromptTemplate t = standard();
  t.name = "compact";
  t.system_text.clear();
  t.assistant_ack_text.clear();
  return t;
}

PromptTemplate PromptTemplate::by_name(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "compact") return compact();
  throw UsageError("unknown prompt template '" + name + "' (expected standard or compact)");
}

namespace {

std::string replace_all(std::string s, const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = s.find(key, pos)) != std::string::npos) {
    s.replace(pos, key.size(), value);
    pos += value.size();
  }
  return s;
}

class Renderer {
 public:
  Renderer(const SubwordTokenizer& tokenizer, PromptRender& out) : tokenizer_(tokenizer), out_(out) {}

  void special(const std::string& piece) {
    out_.text += piece;
    const int id = tokenizer_.vocab().id(piece);
    if (id == Vocabulary::kUnk) throw ModelError("vocabulary lacks the special token " + piece);
    out_.token_ids.push_back(id);
  }

  // Returns the number of tokens appended.
  std::size_t literal(const std::string& s) {
    out_.text += s;
    const auto ids = tokenizer_.encode(s);
    out_.token_ids.insert(out_.token_ids.end(), ids.begin(), ids.end());
    return ids.size();
  }

  void content(const TokenizedText& text, std::vector<int>& positions) {
    out_.text += text.raw_text;
    for (int id : tokenizer_.encode(text)) {
      positions.push_back(static_cast<int>(out_.token_ids.size()));
      out_.token_ids.push_back(id);
    }
  }

  void turn(const PromptTemplate& t, const std::string& role) {
    special(t.turn_start);
    literal(role + "\n");
  }
  void end_turn(const PromptTemplate& t) {
    literal("\n");
    special(t.turn_end);
    literal("\n");
  }

 private:
  const SubwordTokenizer& tokenizer_;
  PromptRender& out_;
};

std::string schema_turn(const EntitySchema& schema, const PromptTemplate& t, bool with_definitions) {
  std::string names = "[";
  for (std::size_t i = 0; i < schema.types.size(); ++i) {
    if (i > 0) names += ", ";
    names += "\"" + schema.types[i].name + "\"";
  }
  names += "]";
  std::string turn = with_definitions ? t.schema_turn_template : t.schema_turn_names_only_template;
  // Substitute {definitions} last so definition text is never re-scanned.
  turn = replace_all(turn, "{count}", std::to_string(schema.types.size()));
  turn = replace_all(turn, "{names}", names);
  if (with_definitions) {
    std::string lines;
    for (std::size_t i = 0; i < schema.types.size(); ++i) {
      if (i > 0) lines += "\n";
      std::string line = t.definition_line_template;
      const std::size_t name_pos = line.find("{name}");
      const std::size_t def_pos = line.find("{definition}");
      if (name_pos == std::string::npos || def_pos == std::string::npos || def_pos < name_pos) {
        throw UsageError("definition line template needs {name} before {definition}");
      }
      line = line.substr(0, name_pos) + schema.types[i].name +
             line.substr(name_pos + 6, def_pos - name_pos - 6) + schema.types[i].definition +
             line.substr(def_pos + 12);
      lines += line;
    }
    turn = replace_all(turn, "{definitions}", lines);
  }
  return turn;
}

}  // namespace

PromptRender render_prompt(const EntitySchema& schema, const TokenizedText& text, const PromptTemplate& tmpl,
                           const SubwordTokenizer& tokenizer, const RenderOptions& options) {
  if (text.empty()) throw DataError("empty input");
  if (schema.types.empty()) throw DataError("empty schema");

  PromptRender out;
  Renderer r(tokenizer, out);

  if (!tmpl.system_text.empty()) {
    r.turn(tmpl, "system");
    r.literal(tmpl.system_text);
    r.end_turn(tmpl);
  }
  r.turn(tmpl, "user");
  r.literal(schema_turn(schema, tmpl, options.include_definitions));
  r.end_turn(tmpl);
  if (!tmpl.assistant_ack_text.empty()) {
    r.turn(tmpl, "assistant");
    r.literal(tmpl.assistant_ack_text);
    r.end_turn(tmpl);
  }

  r.turn(tmpl, "user");
  const std::string& frame = options.duplicate ? tmpl.duplicated_turn_template : tmpl.single_turn_template;
  const std::size_t first = frame.find("{text}");
  if (first == std::string::npos) throw UsageError("text turn template has no {text} placeholder");
  r.literal(frame.substr(0, first));
  r.content(text, out.first_pass_positions);
  std::size_t rest = first + 6;
  if (options.duplicate) {
    const std::size_t second = frame.find("{text}", rest);
    if (second == std::string::npos) throw UsageError("duplicated turn template needs {text} twice");
    const std::size_t sep_tokens = r.literal(frame.substr(rest, second - rest));
    if (sep_tokens == 0) throw UsageError("the text between the two passes must produce at least one token");
    out.sep_position = static_cast<int>(out.token_ids.size()) - 1;
    r.content(text, out.second_pass_positions);
    rest = second + 6;
  }
  if (frame.find("{text}", rest) != std::string::npos) throw UsageError("text turn template has too many {text}");
  r.literal(frame.substr(rest));
  r.end_turn(tmpl);
  return out;
}

std::pair<std::vector<int>, int> duplicate_core(std::span<const int> tokens, int sep) {
  if (tokens.empty()) throw DataError("empty input");
  std::vector<int> out;
  out.reserve(2 * tokens.size() + 1);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.push_back(sep);
  out.insert(out.end(), tokens.begin(), tokens.end());
  return {std::move(out), static_cast<int>(tokens.size()) + 1};
}

Matrix extract_second_pass(const Matrix& hidden, std::span<const int> positions) {
  if (positions.empty()) throw DataError("empty input: no second-pass positions");
  Matrix out(static_cast<Eigen::Index>(positions.size()), hidden.cols());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= hidden.rows()) {
      throw ModelError("second-pass position " + std::to_string(positions[i]) + " is outside the " +
                       std::to_string(hidden.rows()) + "-row hidden matrix (render/backbone mismatch)");
    }
    out.row(static_cast<Eigen::Index>(i)) = hidden.row(positions[i]);
  }
  return out;
}

}  // namespace jpt
