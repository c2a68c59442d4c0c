#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jpt/data/schema.hpp"
#include "jpt/data/tokenizer.hpp"
#include "jpt/util/matrix.hpp"

namespace jpt {

// Chat prompt around the duplicated input. Placeholders:
//   schema turn:      {count} {names} {definitions}
//   definition line:  {name} {definition}
//   duplicated turn:  {text} exactly twice (first pass, second pass)
//   single turn:      {text} exactly once (single-pass ablation)
// Empty system or acknowledgement text drops that turn.
struct PromptTemplate {
  std::string name;
  std::string turn_start = "<|im_start|>";
  std::string turn_end = "<|im_end|>";
  std::string system_text;
  std::string schema_turn_template;
  std::string schema_turn_names_only_template;
  std::string definition_line_template;
  std::string assistant_ack_text;
  std::string duplicated_turn_template;
  std::string single_turn_template;

  // The full production template.
  static PromptTemplate standard();
  // Same schema and duplicated turns without the system and assistant turns.
  static PromptTemplate compact();
  static PromptTemplate by_name(const std::string& name);
};

struct RenderOptions {
  bool include_definitions = true;
  bool duplicate = true;
};

struct PromptRender {
  std::string text;
  std::vector<int> token_ids;
  std::vector<int> first_pass_positions;
  // Empty when rendered without duplication.
  std::vector<int> second_pass_positions;
  // Last token of the text between the two passes; -1 without duplication.
  int sep_position = -1;

  // Positions whose hidden states feed the classifier.
  const std::vector<int>& classified_positions() const {
    return second_pass_positions.empty() ? first_pass_positions : second_pass_positions;
  }
};

// Renders segment by segment, so position maps are exact even when
// neighbouring characters would merge under the tokenizer. `text` holds the
// backbone's pieces; its raw_text is inserted verbatim (no quote escaping).
PromptRender render_prompt(const EntitySchema& schema, const TokenizedText& text, const PromptTemplate& tmpl,
                           const SubwordTokenizer& tokenizer, const RenderOptions& options = {});

// tokens ++ [sep] ++ tokens, with the position of the second copy's first token.
std::pair<std::vector<int>, int> duplicate_core(std::span<const int> tokens, int sep);

// Gathers hidden rows at `positions`, in order.
Matrix extract_second_pass(const Matrix& hidden, std::span<const int> positions);

}  // namespace jpt
