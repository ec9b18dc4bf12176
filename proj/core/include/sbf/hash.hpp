#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace sbf {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = kFnvOffset) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) { return fnv1a(s.data(), s.size(), h); }

inline std::uint64_t fnv1a(double x, std::uint64_t h) { return fnv1a(&x, sizeof x, h); }

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace sbf
