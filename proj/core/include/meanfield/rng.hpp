// Counter-based random streams: every variate is a pure function of
// (seed, replica, particle, step, draw), so trajectories do not depend on
// execution order or worker count.
#pragma once

#include <cstdint>

namespace mfl {

std::uint64_t mix64(std::uint64_t x);

// Stateless counter hash of the full key tuple.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
                           std::uint64_t step, std::uint64_t draw);

// Uniform in (0,1].
double rng_u01(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
               std::uint64_t step, std::uint64_t draw);

// Standard normal (Box-Muller); consumes draws {2*axis, 2*axis+1}.
double rng_normal(std::uint64_t seed, std::uint64_t replica, std::uint64_t particle,
                  std::uint64_t step, std::uint64_t axis);

}  // namespace mfl
