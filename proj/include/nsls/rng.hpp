#pragma once

#include <cmath>
#include <cstdint>

namespace nsls {

// Counter-based splittable generator (SplitMix64 core). Every solve in the
// library is reproducible from (seed, config): the state is a Weyl counter
// and the output is a hash of it, so streams can be split deterministically
// without sharing state. We avoid std::*_distribution on purpose; their
// output is implementation-defined and would break cross-build determinism
// of solver traces.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in {0, ..., n-1} via 128-bit multiply (no modulo bias worth
  // caring about at desk scale, and deterministic everywhere).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal, Box-Muller on our own uniforms.
  double next_gaussian() {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Derive an independent stream; child streams with distinct ids never
  // collide with the parent or each other.
  Rng split(std::uint64_t stream_id) const {
    Rng probe(state_ ^ (0xd1b54a32d192ed03ull * (stream_id + 1)));
    return Rng(probe.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace nsls
