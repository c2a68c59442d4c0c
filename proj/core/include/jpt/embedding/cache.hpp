#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "jpt/embedding/provider.hpp"

namespace jpt {

// Append-only store of definition embeddings keyed by
// hash(provider name, d_enc, text). Entries are never evicted; compact()
// rewrites the log explicitly.
//
// Log file: 8-byte magic "JPTEMB\0\1", then records of
//   u64 key, u32 len + provider name, u32 len + text, u32 d,
//   d x float64, u64 FNV-1a over the record's preceding bytes.
// Sidecar "<path>.idx": one "<key hex> <byte offset>" line per entry.
class EmbeddingCache {
 public:
  struct Entry {
    std::uint64_t key = 0;
    std::string provider;
    std::string text;
    RowVector vector;
  };

  struct VerifyReport {
    std::size_t entries = 0;
    std::size_t bad_checksums = 0;
    std::size_t bad_keys = 0;
    bool sidecar_ok = true;
    bool ok() const { return bad_checksums == 0 && bad_keys == 0 && sidecar_ok; }
  };

  // In-memory only.
  EmbeddingCache() = default;
  // Opens (or creates) the log at `path`. A corrupt log raises ModelError
  // asking for a rebuild.
  explicit EmbeddingCache(std::string path);

  static std::uint64_t key(const std::string& provider, int dim, const std::string& text);

  std::optional<RowVector> find(std::uint64_t key) const;
  // Persists before returning. An existing entry under `key` is kept.
  void insert(const Entry& entry);

  std::size_t size() const;
  std::vector<Entry> entries() const;
  const std::string& path() const { return path_; }

  // Re-reads the log and re-hashes every record.
  VerifyReport verify() const;
  // Rewrites the log with one record per key.
  void compact();

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  void count_hit() const { ++hits_; }
  void count_miss() const { ++misses_; }

 private:
  void write_sidecar() const;

  std::string path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, std::size_t> index_;  // key -> entries_ slot
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t log_size_ = 0;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

// Cache first; on a miss the provider is called and the result persisted.
RowVector embed_definition(const std::string& text, const EmbeddingProvider& provider, EmbeddingCache& cache);

}  // namespace jpt
