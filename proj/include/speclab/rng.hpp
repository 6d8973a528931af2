#pragma once

#include <cstdint>
#include <string_view>

namespace speclab {

// Counter-based generator ("splitmix64-counter"): every draw is a pure hash
// of (seed, stage tag, stream, counter), so substreams can be assigned to
// samples or workers in any order without changing a single output bit.
namespace rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a, folded through the finalizer for avalanche.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return mix64(h);
}

}  // namespace rng

// A keyed counter stream. Draws with the same (key, counter) are identical
// across runs, platforms, and worker partitions.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stage, std::uint64_t stream = 0) {
    key_ = rng::mix64(seed ^ rng::hash_tag(stage));
    key_ = rng::mix64(key_ + stream * rng::kGolden);
  }

  std::uint64_t bits(std::uint64_t counter) const { return rng::mix64(key_ ^ rng::mix64(counter)); }

  // Uniform in [0,1) with 53 random mantissa bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace speclab
