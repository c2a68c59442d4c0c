#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace jpt {

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive, in bytes
  bool operator==(const CharSpan&) const = default;
};

// A text plus its segmentation. `word_ids[i]` names the source unit token i
// was cut from: the whitespace word for tokenize(), the input token for
// retokenize().
struct TokenizedText {
  std::string raw_text;
  std::vector<std::string> tokens;
  std::vector<CharSpan> char_spans;
  std::vector<int> word_ids;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  // Throws DataError when spans overlap, go backwards, leave raw_text, or
  // disagree with the token surface forms, or when word_ids decrease.
  void validate() const;
};

// Reference pre-tokenizer: splits on ASCII whitespace, and every ASCII
// punctuation character becomes a token of its own ("mühlberg-ulze" ->
// "mühlberg", "-", "ulze"). Bytes >= 0x80 are word characters.
TokenizedText pre_tokenize(std::string_view raw_text);

// Builds word-level text from already-segmented tokens joined by one space
// (CoNLL input).
TokenizedText from_words(const std::vector<std::string>& words);

// Tokens of the same source word are concatenated; a single space separates
// different source words.
std::string detokenize(const TokenizedText& text);

// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kImStart = "<|im_start|>";
inline constexpr std::string_view kImEnd = "<|im_end|>";

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  // Starts with the special tokens followed by the fixed subword table.
  Vocabulary();

  // Adds every pre-tokenized unit of `texts` that occurs at least `min_count`
  // times, in order of first appearance.
  static Vocabulary build(const std::vector<std::string>& texts, int min_count = 1);

  int add(std::string_view piece);
  int id(std::string_view piece) const;  // kUnk when absent
  bool contains(std::string_view piece) const;
  const std::string& piece(int id) const;
  std::size_t size() const { return pieces_.size(); }
  std::size_t max_piece_bytes() const { return max_piece_bytes_; }

  // One piece per line; ids are line numbers.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // ASCII letters and digits plus a few frequent English fragments; together
  // they guarantee that any ASCII word splits without <unk>.
  static const std::vector<std::string>& fixed_subwords();

 private:
  struct Empty {};
  explicit Vocabulary(Empty) {}

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  std::size_t max_piece_bytes_ = 0;
};

// Greedy longest-match subword tokenizer over a vocabulary. Units found whole
// in the vocabulary are kept as one piece. Characters no piece covers become
// single-character pieces that map to <unk>; invalid UTF-8 bytes become
// single-byte pieces that map to <unk>. Tokenization never fails.
class SubwordTokenizer {
 public:
  explicit SubwordTokenizer(const Vocabulary& vocab) : vocab_(&vocab) {}

  TokenizedText tokenize(std::string_view raw_text) const;
  // Splits every token of `units` into pieces; word_ids of the result index
  // the tokens of `units`.
  TokenizedText retokenize(const TokenizedText& units) const;
  std::vector<int> encode(const TokenizedText& text) const;
  std::vector<int> encode(std::string_view raw_text) const { return encode(tokenize(raw_text)); }
  // Pieces joined by single spaces.
  std::string decode(const std::vector<int>& ids) const;

  const Vocabulary& vocab() const { return *vocab_; }

 private:
  void split_unit(std::string_view unit, std::size_t offset, int word_id, TokenizedText& out) const;

  const Vocabulary* vocab_;
};

// Length of the UTF-8 sequence starting at s[pos], or 0 when it is invalid.
std::size_t utf8_sequence_length(std::string_view s, std::size_t pos);

}  // namespace jpt
