#pragma once

#include <cstdint>

namespace lieflow::rng {

/// splitmix64 finalizer; statistically strong 64-bit mixing.
inline uint64_t mix(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-based key derivation: every draw is a pure function of the four
/// key components, so regeneration is bit-identical and order-independent.
inline uint64_t key(uint64_t seed, uint64_t stream, uint64_t step, uint64_t comp) {
  uint64_t h = mix(seed);
  h = mix(h ^ (stream + 0xD1B54A32D192ED03ull));
  h = mix(h ^ (step + 0x8CB92BA72F3D8DD7ull));
  h = mix(h ^ (comp + 0xA24BAED4963EE407ull));
  return h;
}

/// Uniform in [0, 1).
inline double uniform(uint64_t seed, uint64_t stream, uint64_t step, uint64_t comp) {
  return static_cast<double>(key(seed, stream, step, comp) >> 11) * 0x1.0p-53;
}

/// Uniform in [a, b).
inline double uniform_in(double a, double b, uint64_t seed, uint64_t stream, uint64_t step,
                         uint64_t comp) {
  return a + (b - a) * uniform(seed, stream, step, comp);
}

/// Standard normal via Box-Muller on two keyed uniforms.
double normal(uint64_t seed, uint64_t stream, uint64_t step, uint64_t comp);

}  // namespace lieflow::rng
