#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "jpt/embedding/cache.hpp"
#include "jpt/embedding/entity.hpp"
#include "jpt/embedding/provider.hpp"
#include "jpt/nn/mlp.hpp"
#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("jpt_emb_" + std::to_string(::getpid()) + "_" + std::to_string(n_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int n_ = 0;
  fs::path path_;
};

TEST(HashProvider, DeterministicUnitNorm) {
  HashEmbeddingProvider p(16), q(16), salted(16, 9);
  RowVector a = p.embed("a city");
  EXPECT_EQ(a, q.embed("a city"));
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  EXPECT_NE(a, p.embed("a town"));
  EXPECT_NE(a, salted.embed("a city"));
  EXPECT_NE(p.name(), salted.name());
}

TEST(EmbedSchema, RowZeroIsTheODefinition) {
  HashEmbeddingProvider p(8);
  EmbeddingCache cache;
  EntitySchema s{{{"PER", "a person"}, {"LOC", "a place"}}};
  Matrix m = embed_schema(s, p, cache);
  ASSERT_EQ(m.rows(), 3);
  EXPECT_EQ(RowVector(m.row(0)), p.embed(s.o_definition));
  EXPECT_EQ(RowVector(m.row(2)), p.embed("a place"));
  Matrix names = embed_schema(s, p, cache, EmbeddingText::kNameOnly);
  EXPECT_EQ(RowVector(names.row(1)), p.embed("PER"));
  EXPECT_EQ(RowVector(names.row(0)), p.embed(s.o_definition));
}

TEST(EmbedSchema, CacheAvoidsRepeatCalls) {
  HashEmbeddingProvider p(8);
  EmbeddingCache cache;
  EntitySchema s{{{"PER", "a person"}}};
  embed_schema(s, p, cache);
  const std::size_t calls = p.calls();
  embed_schema(s, p, cache);
  EXPECT_EQ(p.calls(), calls);
  EXPECT_GE(cache.hits(), 2u);
}

TEST(Cache, PersistsAcrossReopen) {
  TempDir dir;
  HashEmbeddingProvider p(8);
  {
    EmbeddingCache cache(dir.file("c.log"));
    embed_definition("alpha", p, cache);
    embed_definition("beta", p, cache);
  }
  EmbeddingCache reopened(dir.file("c.log"));
  EXPECT_EQ(reopened.size(), 2u);
  auto hit = reopened.find(EmbeddingCache::key(p.name(), 8, "alpha"));
  ASSERT_TRUE(hit);
  EXPECT_EQ(*hit, p.embed("alpha"));
  EXPECT_TRUE(reopened.verify().ok());
  EXPECT_NE(EmbeddingCache::key(p.name(), 8, "alpha"), EmbeddingCache::key(p.name(), 16, "alpha"));
}

TEST(Cache, DetectsCorruption) {
  TempDir dir;
  HashEmbeddingProvider p(8);
  const std::string path = dir.file("c.log");
  {
    EmbeddingCache cache(path);
    embed_definition("alpha", p, cache);
  }
  std::string bytes = binio::read_file(path);
  bytes[bytes.size() - 20] ^= 0x5a;
  binio::write_file(path, bytes);
  EXPECT_THROW(EmbeddingCache{path}, ModelError);
}

TEST(Cache, CompactKeepsEntries) {
  TempDir dir;
  HashEmbeddingProvider p(4);
  const std::string path = dir.file("c.log");
  EmbeddingCache cache(path);
  for (const char* t : {"a", "b", "a", "c"}) embed_definition(t, p, cache);
  cache.compact();
  EXPECT_EQ(cache.size(), 3u);
  EXPECT_TRUE(cache.verify().ok());
  EmbeddingCache reopened(path);
  EXPECT_EQ(reopened.size(), 3u);
}

TEST(RemoteProvider, MatchesServedProvider) {
  auto local = std::make_shared<HashEmbeddingProvider>(8);
  const std::string path = (fs::temp_directory_path() / ("jpt_emb_" + std::to_string(::getpid()) + ".sock")).string();
  EmbeddingProviderServer server(path, local);
  server.start();
  RemoteEmbeddingProvider remote(path, "remote-hash", 8);
  RowVector v = remote.embed("a place");
  server.stop();
  EXPECT_TRUE(v.isApprox(local->embed("a place"), 1e-6));
  EXPECT_THROW(remote.embed("after stop"), ModelError);
  EXPECT_THROW(make_provider("bogus", 8), UsageError);
  EXPECT_EQ(make_provider("hash", 8)->dim(), 8);
}

TEST(EntityProjection, IdentityMlpKeepsRows) {
  ParamSet params;
  init_identity_mlp(params, kEntityMlpPrefix, 8);
  HashEmbeddingProvider p(8);
  EmbeddingCache cache;
  EntitySchema s{{{"PER", "a person"}}};
  Matrix raw = embed_schema(s, p, cache);
  EXPECT_TRUE(build_entity_matrix(s, p, cache, params).isApprox(raw, 1e-15));
  Matrix bad = raw;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(project_entities(bad, params), DataError);
}

}  // namespace
}  // namespace jpt
