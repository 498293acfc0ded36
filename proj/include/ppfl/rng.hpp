#pragma once

#include <cmath>
#include <cstdint>

namespace ppfl {

// Deterministic pseudo-random stream (xoshiro256** core, splitmix64 seeding).
// The standard library distributions are implementation-defined, so every
// sampler the simulator relies on is spelled out here; two runs with the same
// seed produce bit-identical draws on any platform with IEEE doubles.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = split_mix(x);
  }

  // Independent stream addressed by (master seed, a, b), e.g. (seed, client,
  // round).  Streams for distinct (a, b) pairs are decorrelated by the
  // splitmix finalizer, so evaluation order never affects the draws.
  static RngStream derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = master;
    std::uint64_t s = split_mix(x);
    x = s ^ (0x9e3779b97f4a7c15ull * (a + 1));
    s = split_mix(x);
    x = s ^ (0xbf58476d1ce4e5b9ull * (b + 1));
    return RngStream(split_mix(x));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (one value per pair of uniforms, so the
  // stream position does not depend on call history).
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return u < 0.5 ? scale * std::log(2.0 * u) : -scale * std::log(2.0 * (1.0 - u));
  }

  // Fair sign in {-1, +1}.
  int sign() { return (next_u64() >> 63) ? 1 : -1; }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t bound = ~0ull - ~0ull % n;
    std::uint64_t r = next_u64();
    while (r >= bound) r = next_u64();
    return r % n;
  }

 private:
  static std::uint64_t split_mix(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

}  // namespace ppfl
