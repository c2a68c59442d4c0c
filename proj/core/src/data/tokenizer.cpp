#include "jpt/data/tokenizer.hpp"

#include <fstream>

#include "jpt/util/error.hpp"

namespace jpt {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

void push_token(TokenizedText& out, std::string_view raw, std::size_t start, std::size_t end, int word) {
  out.tokens.emplace_back(raw.substr(start, end - start));
  out.char_spans.push_back({start, end});
  out.word_ids.push_back(word);
}

}  // namespace

std::size_t utf8_sequence_length(std::string_view s, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  std::size_t len;
  if (lead < 0x80) return 1;
  if (lead >= 0xc2 && lead <= 0xdf) {
    len = 2;
  } else if (lead >= 0xe0 && lead <= 0xef) {
    len = 3;
  } else if (lead >= 0xf0 && lead <= 0xf4) {
    len = 4;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[pos + k]) & 0xc0) != 0x80) return 0;
  }
  return len;
}

void TokenizedText::validate() const {
  if (tokens.size() != char_spans.size() || tokens.size() != word_ids.size()) {
    throw DataError("tokenized text: tokens, char_spans and word_ids differ in length");
  }
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const CharSpan& s = char_spans[i];
    if (s.start >= s.end || s.start < prev_end || s.end > raw_text.size()) {
      throw DataError("tokenized text: bad char span at token " + std::to_string(i));
    }
    if (raw_text.compare(s.start, s.end - s.start, tokens[i]) != 0) {
      throw DataError("tokenized text: token " + std::to_string(i) + " does not match its char span");
    }
    if (i > 0 && word_ids[i] < word_ids[i - 1]) {
      throw DataError("tokenized text: word_ids decrease at token " + std::to_string(i));
    }
    prev_end = s.end;
  }
}

TokenizedText pre_tokenize(std::string_view raw) {
  TokenizedText out;
  out.raw_text = std::string(raw);
  int word = -1;
  bool in_word = false;
  std::size_t unit_start = 0;
  bool in_unit = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (is_space(c)) {
      if (in_unit) push_token(out, raw, unit_start, i, word);
      in_unit = false;
      in_word = false;
      continue;
    }
    if (!in_word) {
      ++word;
      in_word = true;
    }
    if (is_ascii_punct(c)) {
      if (in_unit) push_token(out, raw, unit_start, i, word);
      push_token(out, raw, i, i + 1, word);
      in_unit = false;
      continue;
    }
    if (!in_unit) {
      unit_start = i;
      in_unit = true;
    }
  }
  if (in_unit) push_token(out, raw, unit_start, raw.size(), word);
  return out;
}

TokenizedText from_words(const std::vector<std::string>& words) {
  TokenizedText out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.raw_text.push_back(' ');
    const std::size_t start = out.raw_text.size();
    out.raw_text += words[i];
    out.tokens.push_back(words[i]);
    out.char_spans.push_back({start, out.raw_text.size()});
    out.word_ids.push_back(static_cast<int>(i));
  }
  return out;
}

std::string detokenize(const TokenizedText& text) {
  std::string out;
  for (std::size_t i = 0; i < text.tokens.size(); ++i) {
    if (i > 0 && text.word_ids[i] != text.word_ids[i - 1]) out.push_back(' ');
    out += text.tokens[i];
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

// --- Vocabulary -------------------------------------------------------------

const std::vector<std::string>& Vocabulary::fixed_subwords() {
  static const std::vector<std::string> kTable = [] {
    std::vector<std::string> t;
    for (char c = 'a'; c <= 'z'; ++c) t.emplace_back(1, c);
    for (char c = 'A'; c <= 'Z'; ++c) t.emplace_back(1, c);
    for (char c = '0'; c <= '9'; ++c) t.emplace_back(1, c);
    for (const char* frag : {"ing", "ed", "er", "es", "est", "ly", "tion", "ment", "ness", "al", "an", "ia",
                             "on", "en", "el", "iff", "ers", "ous", "ic", "ist", "ism", "able", "ful"}) {
      t.emplace_back(frag);
    }
    return t;
  }();
  return kTable;
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
  add(kImStart);
  add(kImEnd);
  for (const std::string& piece : fixed_subwords()) add(piece);
}

int Vocabulary::add(std::string_view piece) {
  if (piece.empty()) throw DataError("vocabulary: empty piece");
  for (char c : piece) {
    if (c == '\n' || c == '\r') throw DataError("vocabulary: piece contains a line break");
  }
  auto [it, inserted] = index_.emplace(std::string(piece), static_cast<int>(pieces_.size()));
  if (inserted) {
    pieces_.emplace_back(piece);
    max_piece_bytes_ = std::max(max_piece_bytes_, piece.size());
  }
  return it->second;
}

int Vocabulary::id(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view piece) const { return index_.count(std::string(piece)) > 0; }

const std::string& Vocabulary::piece(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) {
    throw ModelError("vocabulary: id out of range: " + std::to_string(id));
  }
  return pieces_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int min_count) {
  Vocabulary vocab;
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const std::string& t : texts) {
    for (const std::string& unit : pre_tokenize(t).tokens) {
      bool valid = true;
      for (std::size_t p = 0; p < unit.size();) {
        const std::size_t len = utf8_sequence_length(unit, p);
        if (len == 0) {
          valid = false;
          break;
        }
        p += len;
      }
      if (!valid) continue;
      if (counts[unit]++ == 0) order.push_back(unit);
    }
  }
  for (const std::string& unit : order) {
    if (counts[unit] >= min_count) vocab.add(unit);
  }
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary: " + path);
  for (const std::string& p : pieces_) out << p << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary: " + path);
  Vocabulary vocab{Empty{}};
  std::string line;
  while (std::getline(in, line)) {
    if (vocab.contains(line)) throw DataError("vocabulary: duplicate piece '" + line + "' in " + path);
    vocab.add(line);
  }
  if (vocab.size() < 2 || vocab.pieces_[kPad] != kPadToken || vocab.pieces_[kUnk] != kUnkToken) {
    throw DataError("vocabulary: " + path + " does not start with <pad>, <unk>");
  }
  return vocab;
}

// --- SubwordTokenizer ---------------------------------------------------------

void SubwordTokenizer::split_unit(std::string_view unit, std::size_t offset, int word_id,
                                  TokenizedText& out) const {
  auto emit = [&](std::size_t start, std::size_t end) {
    out.tokens.emplace_back(unit.substr(start, end - start));
    out.char_spans.push_back({offset + start, offset + end});
    out.word_ids.push_back(word_id);
  };
  if (vocab_->contains(unit)) {
    emit(0, unit.size());
    return;
  }
  std::size_t pos = 0;
  while (pos < unit.size()) {
    const std::size_t first = utf8_sequence_length(unit, pos);
    if (first == 0) {
      emit(pos, pos + 1);
      ++pos;
      continue;
    }
    // Longest vocabulary piece starting at pos that ends on a character
    // boundary and does not run into an invalid sequence.
    std::size_t best = 0;
    std::size_t end = pos;
    while (end < unit.size() && end - pos < vocab_->max_piece_bytes()) {
      const std::size_t len = utf8_sequence_length(unit, end);
      if (len == 0) break;
      end += len;
      if (end - pos > vocab_->max_piece_bytes()) break;
      if (vocab_->contains(unit.substr(pos, end - pos))) best = end - pos;
    }
    const std::size_t take = best > 0 ? best : first;
    emit(pos, pos + take);
    pos += take;
  }
}

TokenizedText SubwordTokenizer::tokenize(std::string_view raw_text) const {
  const TokenizedText units = pre_tokenize(raw_text);
  TokenizedText out;
  out.raw_text = units.raw_text;
  for (std::size_t i = 0; i < units.size(); ++i) {
    split_unit(units.tokens[i], units.char_spans[i].start, units.word_ids[i], out);
  }
  return out;
}

TokenizedText SubwordTokenizer::retokenize(const TokenizedText& units) const {
  TokenizedText out;
  out.raw_text = units.raw_text;
  for (std::size_t i = 0; i < units.size(); ++i) {
    split_unit(units.tokens[i], units.char_spans[i].start, static_cast<int>(i), out);
  }
  return out;
}

std::vector<int> SubwordTokenizer::encode(const TokenizedText& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (const std::string& t : text.tokens) ids.push_back(vocab_->id(t));
  return ids;
}

std::string SubwordTokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += vocab_->piece(ids[i]);
  }
  return out;
}

}  // namespace jpt
