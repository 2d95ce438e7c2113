#include "lieflow/rng.hpp"

#include <cmath>
#include <numbers>

namespace lieflow::rng {

double normal(uint64_t seed, uint64_t stream, uint64_t step, uint64_t comp) {
  uint64_t h = key(seed, stream, step, comp);
  uint64_t a = mix(h ^ 0x5851F42D4C957F2Dull);
  uint64_t b = mix(h ^ 0x14057B7EF767814Full);
  // u1 in (0,1] keeps the log finite.
  double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace lieflow::rng
