#pragma once

#include <cstdint>

namespace fragmc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// xoshiro256++ stream, seeded through splitmix64 from (seed, key1..key3).
///
/// Streams are the unit of reproducibility: every simulation routine takes a
/// stream it owns exclusively, and experiment runners derive one stream per
/// replica from (seed, tag, replica index) so results do not depend on the
/// number of worker threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t key1 = 0,
                     std::uint64_t key2 = 0, std::uint64_t key3 = 0) {
    std::uint64_t sm = seed;
    sm ^= 0xd1b54a32d192ed03ull * (key1 + 1);
    sm ^= 0x8cb92ba72f3d8dd7ull * (key2 + 1);
    sm ^= 0xaef17502108ef2d9ull * (key3 + 1);
    s_[0] = splitmix64(sm);
    s_[1] = splitmix64(sm);
    s_[2] = splitmix64(sm);
    s_[3] = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform draw in the open interval (0,1); never returns 0 or 1, so it is
  /// always safe under log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Deterministic seed derivation for sub-experiments (rungs, stages).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k1,
                                 std::uint64_t k2 = 0) {
  std::uint64_t sm = seed ^ (0xd1b54a32d192ed03ull * (k1 + 1)) ^
                     (0x8cb92ba72f3d8dd7ull * (k2 + 1));
  return splitmix64(sm);
}

/// Stream-derivation tags; one per simulation context so replica streams
/// never collide across experiment stages.
namespace stream_tag {
inline constexpr std::uint64_t kDecayProbe = 1;
inline constexpr std::uint64_t kTree = 2;
inline constexpr std::uint64_t kTagged = 3;
inline constexpr std::uint64_t kPairKernel = 4;
inline constexpr std::uint64_t kLln = 5;
inline constexpr std::uint64_t kClt = 6;
inline constexpr std::uint64_t kPairing = 7;
inline constexpr std::uint64_t kRenewalCheck = 8;
inline constexpr std::uint64_t kXval = 9;
inline constexpr std::uint64_t kSimulate = 10;
}  // namespace stream_tag

}  // namespace fragmc
