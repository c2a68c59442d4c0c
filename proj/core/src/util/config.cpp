#include "jpt/util/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

extern char** environ;

namespace jpt {
namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  nlohmann::json value() {
    skip_ws();
    if (at_end()) fail("missing value");
    char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (c == 't' || c == 'f') return boolean();
    return number();
  }

  void skip_ws() {
    while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw UsageError(what + " at column " + std::to_string(pos_ + 1));
  }

 private:
  nlohmann::json string() {
    ++pos_;
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) fail("unterminated escape");
      char e = s_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail(std::string("unknown escape \\") + e);
      }
    }
  }

  nlohmann::json array() {
    ++pos_;
    nlohmann::json out = nlohmann::json::array();
    skip_ws();
    if (!at_end() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip_ws();
      if (at_end()) fail("unterminated array");
      char c = s_[pos_++];
      if (c == ']') return out;
      if (c != ',') fail("expected ',' or ']'");
    }
  }

  nlohmann::json boolean() {
    for (std::string_view word : {"true", "false"}) {
      if (s_.substr(pos_, word.size()) == word) {
        std::size_t end = pos_ + word.size();
        if (end < s_.size() && is_name_char(s_[end])) break;
        pos_ = end;
        return word == "true";
      }
    }
    fail("bad value");
  }

  nlohmann::json number() {
    std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                         s_[pos_] == '-' || s_[pos_] == '+' || s_[pos_] == '_')) {
      ++pos_;
    }
    std::string token(s_.substr(start, pos_ - start));
    token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
    if (token.empty()) fail("bad value");
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    bool integral = token.find_first_of(".eE") == std::string::npos;
    if (integral) {
      long long v = 0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && p == last) return v;
    } else {
      double v = 0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && p == last) return v;
    }
    pos_ = start;
    fail("bad value '" + token + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

nlohmann::json parse_config_value(std::string_view text) {
  ValueParser p(trim(text));
  nlohmann::json v = p.value();
  p.skip_ws();
  if (!p.at_end()) p.fail("trailing characters after value");
  return v;
}

ConfigFile ConfigFile::parse(std::string_view text, const std::string& origin) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw UsageError("unterminated section header");
        std::string_view name = trim(line.substr(1, line.size() - 2));
        if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char) ||
            name.find('_') != std::string_view::npos) {
          throw UsageError("bad section name '" + std::string(name) + "'");
        }
        section = std::string(name);
      } else {
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw UsageError("expected 'key = value'");
        std::string_view key = trim(line.substr(0, eq));
        if (key.empty() || !std::all_of(key.begin(), key.end(), is_name_char)) {
          throw UsageError("bad key '" + std::string(key) + "'");
        }
        std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        if (cfg.has(full)) throw UsageError("duplicate key '" + full + "'");
        cfg.values_[full] = parse_config_value(line.substr(eq + 1));
      }
    } catch (const UsageError& e) {
      throw UsageError(where() + e.what());
    }
    if (end == text.size()) break;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError("config file not found: " + path);
  }
  return parse(binio::read_file(path), path);
}

std::vector<std::string> ConfigFile::apply_env(const std::vector<std::string>& environment) {
  static constexpr std::string_view kPrefix = "JPT_";
  std::vector<std::string> applied;
  for (const std::string& entry : environment) {
    std::size_t eq = entry.find('=');
    if (eq == std::string::npos || entry.compare(0, kPrefix.size(), kPrefix) != 0) continue;
    std::string name = lower(entry.substr(kPrefix.size(), eq - kPrefix.size()));
    std::size_t split = name.find('_');
    if (split == std::string::npos || split == 0 || split + 1 == name.size()) continue;
    std::string key = name.substr(0, split) + "." + name.substr(split + 1);
    std::string raw = entry.substr(eq + 1);
    nlohmann::json value;
    try {
      value = parse_config_value(raw);
    } catch (const UsageError&) {
      value = raw;
    }
    values_[key] = std::move(value);
    applied.push_back(key);
  }
  return applied;
}

std::vector<std::string> ConfigFile::process_environment() {
  std::vector<std::string> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) out.emplace_back(*e);
  return out;
}

const nlohmann::json& ConfigFile::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("missing config key '" + key + "'");
  return it->second;
}

nlohmann::json ConfigFile::to_nested_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : values_) {
    std::size_t dot = key.find('.');
    if (dot == std::string::npos) {
      out[key] = value;
    } else {
      out[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
  }
  return out;
}

}  // namespace jpt
