#pragma once

#include <cstdint>
#include <string_view>

namespace creagen {

// FNV-1a 64-bit, used for content checksums and prompt provenance hashes.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n,
                                   std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(
      std::string_view(static_cast<const char*>(data), n), seed);
}

}  // namespace creagen
