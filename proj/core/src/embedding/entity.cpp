#include "jpt/embedding/entity.hpp"

#include "jpt/nn/mlp.hpp"
#include "jpt/util/error.hpp"

namespace jpt {

Matrix embed_schema(const EntitySchema& schema, const EmbeddingProvider& provider, EmbeddingCache& cache,
                    EmbeddingText text) {
  schema.validate();
  Matrix raw(static_cast<Eigen::Index>(schema.num_classes()), provider.dim());
  raw.row(0) = embed_definition(schema.o_definition, provider, cache);
  for (std::size_t j = 0; j < schema.types.size(); ++j) {
    const EntityTypeDef& t = schema.types[j];
    raw.row(static_cast<Eigen::Index>(j + 1)) =
        embed_definition(text == EmbeddingText::kDefinition ? t.definition : t.name, provider, cache);
  }
  return raw;
}

Matrix project_entities(const Matrix& raw, const ParamSet& params) {
  if (!raw.allFinite()) throw DataError("entity embeddings contain non-finite values");
  return mlp_apply(params, kEntityMlpPrefix, raw);
}

Matrix build_entity_matrix(const EntitySchema& schema, const EmbeddingProvider& provider, EmbeddingCache& cache,
                           const ParamSet& params, EmbeddingText text) {
  return project_entities(embed_schema(schema, provider, cache, text), params);
}

}  // namespace jpt
