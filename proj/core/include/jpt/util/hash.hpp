#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace jpt {

// 64-bit FNV-1a. Stable across platforms and runs; used for content keys and
// payload checksums, never for anything security related.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a64& update(std::span<const std::byte> bytes) {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a64& update(std::string_view s) {
    return update(std::as_bytes(std::span(s.data(), s.size())));
  }
  template <typename T>
  Fnv1a64& update_pod(const T& value) {
    return update(std::as_bytes(std::span(&value, 1)));
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view s) { return Fnv1a64().update(s).digest(); }

std::string to_hex(std::uint64_t value);

}  // namespace jpt
