#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace jpt {

inline constexpr std::string_view kDefaultODefinition = "A token that is not part of any named entity";

struct EntityTypeDef {
  std::string name;
  std::string definition;
  bool operator==(const EntityTypeDef&) const = default;
};

// Class index 0 is the O-class; type k of `types` has class index k + 1.
struct EntitySchema {
  std::vector<EntityTypeDef> types;
  std::string o_definition = std::string(kDefaultODefinition);

  std::size_t num_types() const { return types.size(); }
  std::size_t num_classes() const { return types.size() + 1; }
  // Case-insensitive lookup; returns the class index (1..N).
  std::optional<int> class_of(std::string_view name) const;
  const std::string& name_of(int class_index) const;  // "O" for 0

  // Throws DataError on an empty schema, empty names or definitions, or names
  // that collide case-insensitively.
  void validate() const;
  // Content id, stable across runs (hex of a hash over names and definitions).
  std::string id() const;

  bool operator==(const EntitySchema&) const = default;
};

nlohmann::json schema_to_json(const EntitySchema& schema);
EntitySchema schema_from_json(const nlohmann::json& j);
EntitySchema load_schema(const std::string& path);

std::string to_lower_ascii(std::string_view s);

}  // namespace jpt
