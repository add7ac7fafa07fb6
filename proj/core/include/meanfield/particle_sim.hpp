// Euler-Maruyama simulation of the interacting particle SDE
//   dX_i = (1/N) sum_{j != i} K(X_i - X_j) dt + sqrt(2 sigma) dW_i
// over ensembles of independent replicas. Trajectories are bitwise
// deterministic functions of (config, seed) for any worker count.
#pragma once

#include <cstdint>
#include <vector>

#include "meanfield/kernels.hpp"
#include "meanfield/torus.hpp"

namespace mfl {

enum class InitLaw { Density, Lattice };

struct SimConfig {
  int N = 2;
  int d = 1;
  double sigma = 0.5;
  bool vanishing_sigma = false;  // sigma_N = N^{-beta}
  double beta = 0.0;
  double dt = 1e-3;
  double T = 0.1;
  int R = 1;
  std::uint64_t seed = 0;
  const KernelSpec* kernel = nullptr;  // null = zero kernel
  InitLaw init = InitLaw::Density;
  GridField init_density;  // unit mean; empty = uniform
  int snapshot_stride = 1;
  int workers = 1;

  double effective_sigma() const;
  void validate() const;
};

struct EnsembleState {
  int N = 0;
  int d = 1;
  double t = 0.0;
  std::uint64_t step_index = 0;
  std::vector<std::vector<TorusPoint>> positions;  // R x N
  std::vector<std::uint64_t> cap_events;           // per replica

  int replicas() const { return static_cast<int>(positions.size()); }
};

EnsembleState init_ensemble(const SimConfig& config);

// One Euler-Maruyama step for every replica, in place.
void step(EnsembleState& state, const SimConfig& config);

double min_interparticle_distance(const EnsembleState& state, int replica);

struct Snapshot {
  double t = 0.0;
  EnsembleState state;
  double min_dist = 0.0;                   // over all replicas
  std::vector<double> min_dist_replica;
};

// Advance from 0 to T; snapshot at t=0 and every `snapshot_stride` steps.
std::vector<Snapshot> run(const SimConfig& config);

// Sample positions iid from a density (used by init and by Monte Carlo
// estimators). d=1 inverse CDF, d=2 rejection. Deterministic in the key.
TorusPoint sample_from_density(const GridField& rho, std::uint64_t seed, std::uint64_t replica,
                               std::uint64_t particle);

}  // namespace mfl
