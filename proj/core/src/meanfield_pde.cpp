#include "meanfield/meanfield_pde.hpp"

#include <cmath>
#include <stdexcept>

namespace mfl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

double max_speed(const std::vector<GridField>& u) {
  double m = 0.0;
  for (const auto& comp : u)
    for (double v : comp.values) m = std::max(m, std::abs(v));
  return m;
}

// Spectral transport term -(div(rho u))^ for the current density.
SpectralCoeffs transport_rhs(const PdeState& state, const GridField& rho) {
  SpectralCoeffs rhs(rho.dim, rho.n);
  if (!state.kernel) return rhs;
  auto u = velocity_field(rho, *state.kernel);
  for (int a = 0; a < rho.dim; ++a) {
    GridField flux(rho.dim, rho.n);
    for (std::size_t j = 0; j < flux.size(); ++j)
      flux.values[j] = rho.values[j] * u[static_cast<std::size_t>(a)].values[j];
    SpectralCoeffs flux_hat = forward_transform(flux);
    for (std::size_t j = 0; j < rhs.size(); ++j) {
      auto k = rhs.mode_vec(j);
      int ka = k[a] == -rho.n / 2 ? 0 : k[a];
      rhs.modes[j] -= cplx{0.0, kTwoPi * ka} * flux_hat.modes[j];
    }
  }
  dealias(rhs);
  return rhs;
}

void single_step(PdeState& state, double dt) {
  auto& rho = state.rho;
  SpectralCoeffs rho_hat = forward_transform(rho);

  // Lawson-RK2: exact integrating factor for the diffusion, Heun for the
  // explicit transport term; second order in dt, exact for pure diffusion.
  SpectralCoeffs rhs1 = transport_rhs(state, rho);
  SpectralCoeffs stage = rho_hat;
  for (std::size_t j = 0; j < stage.size(); ++j) {
    double k2 = stage.mode_norm2(j);
    double decay = std::exp(-state.sigma * kTwoPi * kTwoPi * k2 * dt);
    stage.modes[j] = (rho_hat.modes[j] + dt * rhs1.modes[j]) * decay;
  }
  if (state.kernel) {
    GridField mid = inverse_transform(stage);
    SpectralCoeffs rhs2 = transport_rhs(state, mid);
    for (std::size_t j = 0; j < stage.size(); ++j) {
      double k2 = stage.mode_norm2(j);
      double decay = std::exp(-state.sigma * kTwoPi * kTwoPi * k2 * dt);
      stage.modes[j] += 0.5 * dt * (rhs2.modes[j] - rhs1.modes[j] * decay);
    }
  }

  rho = inverse_transform(stage);
  state.t += dt;

  for (double v : rho.values)
    if (!std::isfinite(v)) throw std::runtime_error("meanfield_pde: non-finite density, aborting");

  double mn = rho.min();
  if (mn < -1e-8)
    throw std::runtime_error("meanfield_pde: density fell below the positivity tolerance");
  if (mn < 0.0) {
    for (double& v : rho.values) v = std::max(v, 1e-12);
    double mass = rho.mean();
    for (double& v : rho.values) v /= mass;
    state.floor_events += 1;
  }
}

}  // namespace

std::vector<GridField> velocity_field(const GridField& rho, const KernelSpec& kernel) {
  if (rho.dim != kernel.dim || rho.n != kernel.n)
    throw std::invalid_argument("velocity_field: grid/kernel shape mismatch");
  SpectralCoeffs conv = convolve_coeffs(kernel.spectral_table, forward_transform(rho));
  auto grad = spectral_gradient_coeffs(conv);
  std::vector<GridField> u;
  u.reserve(grad.size());
  for (auto& gc : grad) {
    GridField comp = inverse_transform(gc);
    for (double& v : comp.values) v = -v;
    u.push_back(std::move(comp));
  }
  return u;
}

void advance(PdeState& state, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be positive");
  double h = state.rho.h();
  int splits = 0;
  if (state.kernel) {
    double speed = max_speed(velocity_field(state.rho, *state.kernel));
    while (splits < 16 && speed > 0.0 && dt / (1 << splits) > 0.5 * h / speed) ++splits;
  }
  int sub = 1 << splits;
  for (int s = 0; s < sub; ++s) single_step(state, dt / sub);
}

FreeEnergy free_energy(const PdeState& state) {
  FreeEnergy fe;
  const auto& rho = state.rho;
  double cell = std::pow(rho.h(), rho.dim);
  for (double v : rho.values) {
    if (v <= 0.0) throw std::invalid_argument("free_energy: nonpositive density value");
    fe.entropy += v * std::log(v) * cell;
  }
  if (state.kernel) {
    SpectralCoeffs rho_hat = forward_transform(rho);
    for (std::size_t j = 0; j < rho_hat.size(); ++j)
      fe.interaction +=
          0.5 * state.kernel->spectral_table.modes[j].real() * std::norm(rho_hat.modes[j]);
  }
  fe.total = fe.entropy + fe.interaction;
  return fe;
}

}  // namespace mfl
