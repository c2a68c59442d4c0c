#include "jpt/embedding/provider.hpp"

#include <cmath>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {

namespace {

constexpr std::uint8_t kEmbedRequest = 2;

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(int dim, std::uint64_t salt) : dim_(dim), salt_(salt) {
  if (dim <= 0) throw UsageError("embedding dimension must be positive");
}

std::string HashEmbeddingProvider::name() const {
  return salt_ == 0 ? "hash" : "hash:" + std::to_string(salt_);
}

RowVector HashEmbeddingProvider::embed(const std::string& text) const {
  ++calls_;
  Rng rng(Fnv1a64().update_pod(salt_).update(text).digest());
  RowVector v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = rng.normal();
  return v / v.norm();
}

RowVector RemoteEmbeddingProvider::embed(const std::string& text) const {
  std::string request;
  binio::put<std::uint8_t>(request, kEmbedRequest);
  binio::put_string(request, text);
  try {
    net::UnixSocket s = net::UnixSocket::connect(socket_path_);
    net::write_frame(s, request);
    auto response = net::read_frame(s);
    if (!response) throw ModelError("connection closed without an answer");
    binio::Reader r(*response);
    if (r.get<std::uint8_t>() != 0) throw ModelError(r.get_string());
    const auto d = r.get<std::uint32_t>();
    if (static_cast<int>(d) != dim_) {
      throw ModelError("returned " + std::to_string(d) + " dimensions, expected " + std::to_string(dim_));
    }
    RowVector v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = r.get<float>();
    return v;
  } catch (const Error& e) {
    throw ModelError("embedding provider '" + name_ + "' failed: " + e.what());
  }
}

EmbeddingProviderServer::EmbeddingProviderServer(std::string socket_path,
                                                 std::shared_ptr<const EmbeddingProvider> provider)
    : provider_(std::move(provider)), server_(std::move(socket_path), [this](const std::string& request) {
        std::string out;
        try {
          binio::Reader r(request);
          if (r.get<std::uint8_t>() != kEmbedRequest) throw DataError("unknown request kind");
          const RowVector v = provider_->embed(r.get_string());
          binio::put<std::uint8_t>(out, 0);
          binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
          for (Eigen::Index i = 0; i < v.size(); ++i) binio::put<float>(out, static_cast<float>(v(i)));
        } catch (const Error& e) {
          out.clear();
          binio::put<std::uint8_t>(out, 1);
          binio::put_string(out, e.what());
        }
        return out;
      }) {}

std::shared_ptr<EmbeddingProvider> make_provider(const std::string& spec, int dim) {
  if (spec == "hash") return std::make_shared<HashEmbeddingProvider>(dim);
  if (spec.rfind("hash:", 0) == 0) {
    try {
      return std::make_shared<HashEmbeddingProvider>(dim, std::stoull(spec.substr(5)));
    } catch (const std::logic_error&) {
      throw UsageError("bad hash provider salt in '" + spec + "'");
    }
  }
  if (spec.rfind("remote:", 0) == 0) {
    const std::size_t colon = spec.rfind(':');
    if (colon <= 7) throw UsageError("remote provider spec must be remote:<socket>:<name>");
    return std::make_shared<RemoteEmbeddingProvider>(spec.substr(7, colon - 7), spec.substr(colon + 1), dim);
  }
  throw UsageError("unknown embedding provider '" + spec + "' (expected hash, hash:<salt> or remote:<socket>:<name>)");
}

}  // namespace jpt
