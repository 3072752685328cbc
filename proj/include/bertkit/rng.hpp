#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace bertkit {

// Identifier written into shard manifests so shards can be regenerated by
// any implementation of the same stream.
inline constexpr const char* kRngId = "splitmix64-v1";

// Stateless SplitMix64 finalizer.
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a over raw bytes; stable across platforms.
inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Key for a named substream: seed, a label (e.g. a doc_id or "shuffle"),
// and an index are hashed together. This is the pinned contract for all
// data-generation randomness.
inline uint64_t stream_key(uint64_t seed, std::string_view label, uint64_t index) {
  uint64_t k = mix64(seed + 0x9e3779b97f4a7c15ull);
  k = mix64(k ^ fnv1a64(label));
  k = mix64(k ^ (index + 0x9e3779b97f4a7c15ull));
  return k;
}

// SplitMix64 sequence generator. State advances by the golden-ratio
// increment; next_u64 applies the finalizer.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Plain modulo; the bias is immaterial for n << 2^64.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  bool next_coin() { return (next_u64() & 1u) != 0; }

  // Standard normal via Box-Muller (one value per call, second discarded
  // to keep the stream position a simple function of call count).
  double next_normal();

  // Normal(0, stddev) re-drawn until within two standard deviations.
  double next_trunc_normal(double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

inline double SplitMix64::next_normal() {
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - next_double();
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline double SplitMix64::next_trunc_normal(double stddev) {
  for (;;) {
    double x = next_normal() * stddev;
    if (std::abs(x) <= 2.0 * stddev) return x;
  }
}

}  // namespace bertkit
