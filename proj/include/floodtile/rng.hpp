#pragma once

#include <cstdint>

namespace floodtile {

// splitmix64 finalizer; bit-stable across platforms and compilers
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a root seed and a stream index.
// Used to give every (epoch, step, slot) its own generator so batch
// assembly order or worker count cannot change the sampled data.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return mix64(seed ^ mix64(stream ^ 0x632be59bd9b4e019ull));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Small deterministic generator (splitmix64 sequence). We avoid
// std::uniform_*_distribution on purpose: its output is implementation
// defined, and run manifests promise bit-identical replays.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // [0, n); multiply-high mapping, bias < n / 2^64
  uint64_t next_below(uint64_t n) {
    return uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  uint64_t state_;
};

}  // namespace floodtile
