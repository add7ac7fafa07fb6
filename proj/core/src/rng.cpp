#include "meanfield/rng.hpp"

#include <cmath>

namespace mfl {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
                           std::uint64_t step, std::uint64_t draw) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (replica * 0xd6e8feb86659fd93ULL));
  h = mix64(h ^ (particle * 0xa3b195354a39b70dULL));
  h = mix64(h ^ (step * 0x1b03738712fad5c9ULL));
  h = mix64(h ^ (draw * 0xe7037ed1a0b428dbULL));
  return h;
}

double rng_u01(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
               std::uint64_t step, std::uint64_t draw) {
  std::uint64_t h = counter_hash(seed, replica, particle, step, draw);
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;  // in (0,1]
}

double rng_normal(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
                  std::uint64_t step, std::uint64_t axis) {
  double u1 = rng_u01(seed, replica, particle, step, 2 * axis);
  double u2 = rng_u01(seed, replica, particle, step, 2 * axis + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace mfl
