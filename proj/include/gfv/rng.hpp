#pragma once

#include <cstdint>
#include <random>

namespace gfv {

using Rng = std::mt19937_64;

// Fibonacci-hashing finalizer (splitmix64). Used to decorrelate user seeds
// and to derive independent streams from one master seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a stream seed from (master, a, b). Streams with distinct (a, b)
// are independent for practical purposes; the derivation is stateless, so
// any (seed, step) pair can be replayed without engine serialization.
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
  uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (b + 0xc2b2ae3d27d4eb4fULL));
  return h;
}

inline Rng make_rng(uint64_t seed) { return Rng(splitmix64(seed)); }

// Named sub-streams of the training master seed.
namespace rng_stream {
constexpr uint64_t kInit = 1;
constexpr uint64_t kBatch = 2;
constexpr uint64_t kMask = 3;
constexpr uint64_t kSample = 4;
}  // namespace rng_stream

}  // namespace gfv
