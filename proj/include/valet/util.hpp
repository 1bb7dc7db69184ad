#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace valet {

using Bytes = std::vector<uint8_t>;

constexpr uint64_t align_up(uint64_t n, uint64_t a) { return (n + a - 1) / a * a; }

constexpr bool is_aligned(uint64_t n, uint64_t a) { return n % a == 0; }

// splitmix64: tiny, well-known, bit-stable across platforms.  Used for
// deterministic payload synthesis and for deriving per-op data seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic payload: `size` bytes derived from `seed`.  Offset-stable:
// byte i depends only on (seed, i/8), so partial reads can be re-derived.
Bytes synth_payload(uint64_t seed, uint64_t size);

// FNV-1a (64-bit), used for extension bucketing and seed mixing.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

// Mix two 64-bit values into a fresh seed (order-sensitive).
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

std::string human_bytes(uint64_t n);

}  // namespace valet
