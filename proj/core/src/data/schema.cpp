#include "jpt/data/schema.hpp"

#include <set>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::optional<int> EntitySchema::class_of(std::string_view name) const {
  const std::string key = to_lower_ascii(name);
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (to_lower_ascii(types[i].name) == key) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

const std::string& EntitySchema::name_of(int class_index) const {
  static const std::string kO = "O";
  if (class_index == 0) return kO;
  if (class_index < 0 || static_cast<std::size_t>(class_index) > types.size()) {
    throw DataError("class index out of range: " + std::to_string(class_index));
  }
  return types[static_cast<std::size_t>(class_index) - 1].name;
}

void EntitySchema::validate() const {
  if (types.empty()) throw DataError("empty schema");
  if (o_definition.empty()) throw DataError("schema: empty O-class definition");
  std::set<std::string> seen;
  for (const EntityTypeDef& t : types) {
    if (t.name.empty()) throw DataError("schema: entity type with an empty name");
    if (t.definition.empty()) throw DataError("schema: type '" + t.name + "' has an empty definition");
    if (!seen.insert(to_lower_ascii(t.name)).second) {
      throw DataError("schema: duplicate type name '" + t.name + "' (names are case-insensitive)");
    }
  }
}

std::string EntitySchema::id() const {
  Fnv1a64 h;
  h.update_pod(static_cast<std::uint64_t>(types.size()));
  for (const EntityTypeDef& t : types) {
    h.update_pod(static_cast<std::uint64_t>(t.name.size())).update(t.name);
    h.update_pod(static_cast<std::uint64_t>(t.definition.size())).update(t.definition);
  }
  h.update_pod(static_cast<std::uint64_t>(o_definition.size())).update(o_definition);
  return to_hex(h.digest());
}

nlohmann::json schema_to_json(const EntitySchema& schema) {
  nlohmann::json types = nlohmann::json::array();
  for (const EntityTypeDef& t : schema.types) types.push_back({{"name", t.name}, {"definition", t.definition}});
  return {{"types", std::move(types)}, {"o_definition", schema.o_definition}};
}

EntitySchema schema_from_json(const nlohmann::json& j) {
  EntitySchema schema;
  const nlohmann::json* types = &j;
  if (j.is_object()) {
    if (!j.contains("types")) throw DataError("schema JSON: missing 'types'");
    types = &j.at("types");
    if (j.contains("o_definition")) {
      if (!j.at("o_definition").is_string()) throw DataError("schema JSON: 'o_definition' must be a string");
      schema.o_definition = j.at("o_definition").get<std::string>();
    }
  }
  if (!types->is_array()) throw DataError("schema JSON: 'types' must be an array");
  for (const auto& t : *types) {
    if (!t.is_object() || !t.contains("name") || !t.at("name").is_string()) {
      throw DataError("schema JSON: every type needs a string 'name'");
    }
    EntityTypeDef def;
    def.name = t.at("name").get<std::string>();
    def.definition = t.contains("definition") && t.at("definition").is_string()
                         ? t.at("definition").get<std::string>()
                         : std::string();
    schema.types.push_back(std::move(def));
  }
  schema.validate();
  return schema;
}

EntitySchema load_schema(const std::string& path) {
  const std::string content = binio::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("schema file " + path + ": " + e.what());
  }
  return schema_from_json(j);
}

}  // namespace jpt
