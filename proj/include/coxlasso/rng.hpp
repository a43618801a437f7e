#pragma once

#include <cmath>
#include <cstdint>

namespace coxlasso {

// 64-bit mixing step of SplitMix64. Bijective and well dispersed; this is the
// only primitive all randomness in the library is built from, so results do
// not depend on standard library distribution internals.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a stream label into a seed. Distinct labels give effectively
// independent substreams; the operation is ordered, derive_stream(s, a, b)
// and derive_stream(s, b, a) differ.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t label) {
  return mix64(seed ^ (0xbf58476d1ce4e5b9ULL + mix64(label)));
}

constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_stream(derive_stream(seed, a), b);
}

// Counter-mode generator: the k-th draw of a stream depends only on the key
// and k. Streams can be created cheaply anywhere (per subject, per
// replication, per sampling block) and never share state, which is what makes
// simulation output independent of thread count and call order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_stream(seed, stream)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inverse-transform exponential. uniform01() < 1 keeps the log argument
  // positive, so the result is always finite.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Box-Muller, using one fresh pair of uniforms per call. Slightly wasteful
  // but stateless across calls, which keeps draw sequences easy to reason
  // about.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace coxlasso
