// Pseudo-spectral solver for the limit McKean-Vlasov equation
//   d_t rho + div(rho u) = sigma Laplace rho,   u = -grad V * rho,
// on the torus (d = 1 or 2). Diffusion is integrated exactly in Fourier
// space; the transport term is explicit with 2/3-rule dealiasing.
#pragma once

#include "meanfield/kernels.hpp"
#include "meanfield/torus.hpp"

namespace mfl {

struct PdeState {
  GridField rho;
  double t = 0.0;
  double sigma = 0.0;
  const KernelSpec* kernel = nullptr;  // null = pure heat flow
  long floor_events = 0;               // positivity floor activations
};

// u = -grad(V * rho), synthesized on the grid.
std::vector<GridField> velocity_field(const GridField& rho, const KernelSpec& kernel);

// One step of size dt; sub-steps are halved automatically on CFL violation.
void advance(PdeState& state, double dt);

struct FreeEnergy {
  double entropy = 0.0;      // integral of rho log rho
  double interaction = 0.0;  // (1/2) sum_k Vhat(k) |rhohat(k)|^2
  double total = 0.0;
};

FreeEnergy free_energy(const PdeState& state);

}  // namespace mfl
