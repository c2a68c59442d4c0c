#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace jpt {

// A small TOML-like key/value format.
//
//   file     := line*
//   line     := ws (comment | section | pair)? ws comment? NEWLINE
//   comment  := '#' any*
//   section  := '[' name ']'
//   pair     := name ws '=' ws value
//   name     := [A-Za-z0-9_]+              (section names: no '_')
//   value    := string | integer | float | bool | array
//   string   := '"' (char | '\"' | '\\' | '\n' | '\t')* '"'
//   bool     := 'true' | 'false'
//   array    := '[' (value (',' value)*)? ']'
//
// Keys are addressed as "section.key"; pairs before the first section header
// land in the "" section and are addressed by bare name. Environment variables
// JPT_<SECTION>_<KEY> (case-insensitive) override or add "section.key".
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, const std::string& origin = "<string>");
  static ConfigFile load(const std::string& path);

  // Each entry is "NAME=VALUE" as in environ. Values use the same grammar; a
  // value that does not parse is taken as a bare string. Returns the keys that
  // were overridden.
  std::vector<std::string> apply_env(const std::vector<std::string>& environment);
  static std::vector<std::string> process_environment();

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const nlohmann::json& at(const std::string& key) const;
  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }
  const std::map<std::string, nlohmann::json>& values() const { return values_; }

  // {"section": {"key": value}}; unsectioned keys sit at the top level.
  nlohmann::json to_nested_json() const;

 private:
  std::map<std::string, nlohmann::json> values_;
};

// Parses a single value per the grammar above; throws UsageError.
nlohmann::json parse_config_value(std::string_view text);

}  // namespace jpt
