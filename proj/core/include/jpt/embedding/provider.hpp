#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "jpt/util/matrix.hpp"
#include "jpt/util/socket.hpp"

namespace jpt {

// Maps a definition string to a fixed d_enc vector. Implementations must be
// deterministic and safe to call concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual RowVector embed(const std::string& text) const = 0;
};

// Test double: a unit-norm Gaussian vector drawn from a stream seeded by the
// text's hash. Equal strings give bitwise-equal vectors on every platform.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(int dim, std::uint64_t salt = 0);

  std::string name() const override;
  int dim() const override { return dim_; }
  RowVector embed(const std::string& text) const override;

  std::size_t calls() const { return calls_.load(); }

 private:
  int dim_;
  std::uint64_t salt_;
  mutable std::atomic<std::size_t> calls_{0};
};

// Out-of-process provider. Frames, little-endian:
//   request   u8 kind = 2, u32 length + UTF-8 text
//   response  u8 status; 0: u32 d, d x float32; 1: u32 length + message
class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::string socket_path, std::string name, int dim)
      : socket_path_(std::move(socket_path)), name_(std::move(name)), dim_(dim) {}

  std::string name() const override { return name_; }
  int dim() const override { return dim_; }
  RowVector embed(const std::string& text) const override;

 private:
  std::string socket_path_;
  std::string name_;
  int dim_;
};

class EmbeddingProviderServer {
 public:
  EmbeddingProviderServer(std::string socket_path, std::shared_ptr<const EmbeddingProvider> provider);
  void start() { server_.start(); }
  void stop() { server_.stop(); }

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  net::FrameServer server_;
};

// Providers the CLI can construct by name: "hash" (optionally "hash:<salt>")
// or "remote:<socket path>:<name>".
std::shared_ptr<EmbeddingProvider> make_provider(const std::string& spec, int dim);

}  // namespace jpt
