#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace tasktcn {

/// Incremental 64-bit FNV-1a. Used for checkpoint fingerprints and cache keys,
/// not for anything security-relevant.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) noexcept {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  template <typename T>
  void update(std::span<const T> values) noexcept {
    update(values.data(), values.size_bytes());
  }
  template <typename T>
  void update_value(const T& v) noexcept {
    update(&v, sizeof(T));
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace tasktcn
