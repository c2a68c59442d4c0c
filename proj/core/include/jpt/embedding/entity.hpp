#pragma once

#include <string>

#include "jpt/data/schema.hpp"
#include "jpt/embedding/cache.hpp"
#include "jpt/nn/params.hpp"

namespace jpt {

inline constexpr const char* kEntityMlpPrefix = "entity_mlp";

// What the embedding channel sees for each type.
enum class EmbeddingText { kDefinition, kNameOnly };

// (N+1) x d_enc: row 0 embeds the O definition, rows 1..N the types in schema
// order.
Matrix embed_schema(const EntitySchema& schema, const EmbeddingProvider& provider, EmbeddingCache& cache,
                    EmbeddingText text = EmbeddingText::kDefinition);

// Row-wise entity projection network to d_p.
Matrix project_entities(const Matrix& raw, const ParamSet& params);

Matrix build_entity_matrix(const EntitySchema& schema, const EmbeddingProvider& provider, EmbeddingCache& cache,
                           const ParamSet& params, EmbeddingText text = EmbeddingText::kDefinition);

}  // namespace jpt
