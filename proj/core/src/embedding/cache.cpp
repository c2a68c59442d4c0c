#include "jpt/embedding/cache.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {

namespace {

constexpr char kCacheMagic[8] = {'J', 'P', 'T', 'E', 'M', 'B', '\0', '\1'};

std::string rebuild_hint(const std::string& path) {
  return "; delete " + path + " and rebuild it with `jpt cache warm`";
}

std::string serialize_record(const EmbeddingCache::Entry& e) {
  std::string out;
  binio::put<std::uint64_t>(out, e.key);
  binio::put_string(out, e.provider);
  binio::put_string(out, e.text);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(e.vector.size()));
  for (Eigen::Index i = 0; i < e.vector.size(); ++i) binio::put<double>(out, e.vector(i));
  binio::put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

EmbeddingCache::Entry parse_record(binio::Reader& r) {
  EmbeddingCache::Entry e;
  e.key = r.get<std::uint64_t>();
  e.provider = r.get_string();
  e.text = r.get_string();
  const auto d = r.get<std::uint32_t>();
  if (std::size_t{d} * 8 > r.remaining()) throw DataError("record vector runs past the end of the log");
  e.vector.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) e.vector(i) = r.get<double>();
  return e;
}

struct LogScan {
  std::vector<EmbeddingCache::Entry> records;
  std::vector<std::uint64_t> offsets;
  std::vector<bool> checksum_ok;
};

LogScan scan_log(const std::string& bytes, const std::string& path) {
  LogScan scan;
  if (bytes.size() < sizeof(kCacheMagic) || std::memcmp(bytes.data(), kCacheMagic, sizeof(kCacheMagic)) != 0) {
    throw ModelError("embedding cache " + path + " has a bad header" + rebuild_hint(path));
  }
  binio::Reader r(bytes);
  r.get_bytes(sizeof(kCacheMagic));
  try {
    while (!r.done()) {
      const std::size_t start = r.position();
      EmbeddingCache::Entry entry = parse_record(r);
      const std::size_t body_end = r.position();
      const auto stored = r.get<std::uint64_t>();
      scan.offsets.push_back(start);
      scan.checksum_ok.push_back(stored == fnv1a64(std::string_view(bytes.data() + start, body_end - start)));
      scan.records.push_back(std::move(entry));
    }
  } catch (const DataError&) {
    throw ModelError("embedding cache " + path + " is truncated" + rebuild_hint(path));
  }
  return scan;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) {
    binio::write_file(path_, std::string(kCacheMagic, sizeof(kCacheMagic)));
    log_size_ = sizeof(kCacheMagic);
    write_sidecar();
    return;
  }
  const std::string bytes = binio::read_file(path_);
  LogScan scan = scan_log(bytes, path_);
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    Entry& e = scan.records[i];
    if (!scan.checksum_ok[i] || e.key != key(e.provider, static_cast<int>(e.vector.size()), e.text)) {
      throw ModelError("embedding cache " + path_ + " failed its hash check at byte " +
                       std::to_string(scan.offsets[i]) + rebuild_hint(path_));
    }
    if (index_.count(e.key) != 0) continue;
    index_[e.key] = entries_.size();
    entries_.push_back(std::move(e));
    offsets_.push_back(scan.offsets[i]);
  }
  log_size_ = bytes.size();
  write_sidecar();
}

std::uint64_t EmbeddingCache::key(const std::string& provider, int dim, const std::string& text) {
  Fnv1a64 h;
  h.update_pod(static_cast<std::uint64_t>(provider.size())).update(provider);
  h.update_pod(static_cast<std::int64_t>(dim));
  h.update_pod(static_cast<std::uint64_t>(text.size())).update(text);
  return h.digest();
}

std::optional<RowVector> EmbeddingCache::find(std::uint64_t k) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(k);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].vector;
}

void EmbeddingCache::insert(const Entry& entry) {
  std::unique_lock lock(mutex_);
  if (index_.count(entry.key) != 0) return;
  if (!path_.empty()) {
    const std::string record = serialize_record(entry);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
    out.flush();
    if (!out) throw ModelError("cannot append to embedding cache " + path_);
    offsets_.push_back(log_size_);
    log_size_ += record.size();
  }
  index_[entry.key] = entries_.size();
  entries_.push_back(entry);
  if (!path_.empty()) {
    std::ofstream idx(path_ + ".idx", std::ios::app);
    char line[64];
    std::snprintf(line, sizeof(line), "%s %llu\n", to_hex(entry.key).c_str(),
                  static_cast<unsigned long long>(offsets_.back()));
    idx << line;
  }
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<EmbeddingCache::Entry> EmbeddingCache::entries() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

void EmbeddingCache::write_sidecar() const {
  if (path_.empty()) return;
  std::string out;
  char line[64];
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::snprintf(line, sizeof(line), "%s %llu\n", to_hex(entries_[i].key).c_str(),
                  static_cast<unsigned long long>(offsets_[i]));
    out += line;
  }
  binio::write_file(path_ + ".idx", out);
}

EmbeddingCache::VerifyReport EmbeddingCache::verify() const {
  std::shared_lock lock(mutex_);
  VerifyReport report;
  if (path_.empty()) {
    for (const Entry& e : entries_) {
      ++report.entries;
      if (e.key != key(e.provider, static_cast<int>(e.vector.size()), e.text)) ++report.bad_keys;
    }
    return report;
  }
  const LogScan scan = scan_log(binio::read_file(path_), path_);
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    const Entry& e = scan.records[i];
    ++report.entries;
    if (!scan.checksum_ok[i]) ++report.bad_checksums;
    if (e.key != key(e.provider, static_cast<int>(e.vector.size()), e.text)) ++report.bad_keys;
  }
  std::string expected;
  char line[64];
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::snprintf(line, sizeof(line), "%s %llu\n", to_hex(entries_[i].key).c_str(),
                  static_cast<unsigned long long>(offsets_[i]));
    expected += line;
  }
  try {
    report.sidecar_ok = binio::read_file(path_ + ".idx") == expected;
  } catch (const DataError&) {
    report.sidecar_ok = false;
  }
  return report;
}

void EmbeddingCache::compact() {
  std::unique_lock lock(mutex_);
  if (path_.empty()) return;
  std::string out(kCacheMagic, sizeof(kCacheMagic));
  offsets_.clear();
  for (const Entry& e : entries_) {
    offsets_.push_back(out.size());
    out += serialize_record(e);
  }
  const std::string tmp = path_ + ".tmp";
  binio::write_file(tmp, out);
  std::filesystem::rename(tmp, path_);
  log_size_ = out.size();
  write_sidecar();
}

RowVector embed_definition(const std::string& text, const EmbeddingProvider& provider, EmbeddingCache& cache) {
  if (text.empty()) throw DataError("cannot embed an empty definition");
  const std::uint64_t k = EmbeddingCache::key(provider.name(), provider.dim(), text);
  if (auto hit = cache.find(k)) {
    cache.count_hit();
    return *hit;
  }
  cache.count_miss();
  RowVector v;
  try {
    v = provider.embed(text);
  } catch (const ModelError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelError("embedding provider '" + provider.name() + "' failed: " + e.what());
  }
  if (v.size() != provider.dim()) {
    throw ModelError("embedding provider '" + provider.name() + "' returned " + std::to_string(v.size()) +
                     " dimensions, expected " + std::to_string(provider.dim()));
  }
  if (!v.allFinite()) throw ModelError("embedding provider '" + provider.name() + "' returned non-finite values");
  cache.insert({k, provider.name(), text, v});
  return v;
}

}  // namespace jpt
