#include "meanfield/liouville.hpp"

#include <cmath>
#include <stdexcept>

namespace mfl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

LiouvilleState make_liouville(int N, int d, int m, double sigma, const KernelSpec* kernel,
                              const GridField& rho0) {
  if (N * d > 2)
    throw std::invalid_argument("liouville: this build supports N*d <= 2 (use N=2, d=1)");
  if (rho0.dim != d) throw std::invalid_argument("liouville: rho0 dimension mismatch");
  if (rho0.min() < 0.0 || rho0.mean() <= 0.0)
    throw std::invalid_argument("liouville: rho0 must be a nonnegative density with mass");

  LiouvilleState st;
  st.N = N;
  st.d = d;
  st.sigma = sigma;
  st.kernel = kernel;
  st.rhoN = GridField(N * d, m);

  // resample rho0 onto the m-grid and tensorize
  std::vector<double> r0(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    r0[static_cast<std::size_t>(i)] = rho0.interp(TorusPoint{static_cast<double>(i) / m, 0.0});
  double mass = 0.0;
  for (double v : r0) mass += v;
  mass /= m;
  for (double& v : r0) v /= mass;

  if (N == 1) {
    st.rhoN.values = r0;
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        st.rhoN.at(i, j) = r0[static_cast<std::size_t>(i)] * r0[static_cast<std::size_t>(j)];
  }

  // drift field b_i(X) = (1/N) sum_{j != i} K(x_i - x_j) on the product grid
  if (kernel && N == 2) {
    st.drift.assign(2, GridField(2, m));
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double disp = torus_displacement1(static_cast<double>(i) / m, static_cast<double>(j) / m);
        auto f = eval_force(*kernel, {disp, 0.0});
        st.drift[0].at(i, j) = 0.5 * f.f[0];
        st.drift[1].at(i, j) = -0.5 * f.f[0];
      }
    }
  }
  return st;
}

namespace {

// Spectral drift term -(sum_a d_a(rho b_a))^ against the frozen drift field.
SpectralCoeffs drift_rhs(const LiouvilleState& st, const GridField& rho) {
  SpectralCoeffs rhs(rho.dim, rho.n);
  if (st.drift.empty()) return rhs;
  for (int a = 0; a < rho.dim; ++a) {
    GridField flux(rho.dim, rho.n);
    for (std::size_t j = 0; j < flux.size(); ++j)
      flux.values[j] = rho.values[j] * st.drift[static_cast<std::size_t>(a)].values[j];
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

void liouville_step(LiouvilleState& st, double dt) {
  auto& rho = st.rhoN;
  SpectralCoeffs rho_hat = forward_transform(rho);

  // Lawson-RK2: exact diffusion factor, Heun for the explicit transport term.
  SpectralCoeffs rhs1 = drift_rhs(st, rho);
  SpectralCoeffs stage = rho_hat;
  for (std::size_t j = 0; j < stage.size(); ++j) {
    double k2 = stage.mode_norm2(j);
    double decay = std::exp(-st.sigma * kTwoPi * kTwoPi * k2 * dt);
    stage.modes[j] = (rho_hat.modes[j] + dt * rhs1.modes[j]) * decay;
  }
  if (!st.drift.empty()) {
    GridField mid = inverse_transform(stage);
    SpectralCoeffs rhs2 = drift_rhs(st, mid);
    for (std::size_t j = 0; j < stage.size(); ++j) {
      double k2 = stage.mode_norm2(j);
      double decay = std::exp(-st.sigma * kTwoPi * kTwoPi * k2 * dt);
      stage.modes[j] += 0.5 * dt * (rhs2.modes[j] - rhs1.modes[j] * decay);
    }
  }
  rho = inverse_transform(stage);
  st.t += dt;

  for (double v : rho.values)
    if (!std::isfinite(v)) throw std::runtime_error("liouville: non-finite density, aborting");
  double mn = rho.min();
  if (mn < -1e-8) throw std::runtime_error("liouville: density fell below the positivity tolerance");
  if (mn < 0.0) {
    for (double& v : rho.values) v = std::max(v, 1e-12);
    double mass = rho.mean();
    for (double& v : rho.values) v /= mass;
    st.floor_events += 1;
  }
}

}  // namespace

void advance_liouville(LiouvilleState& state, double dt) {
  double h = state.rhoN.h();
  double speed = 0.0;
  for (const auto& b : state.drift)
    for (double v : b.values) speed = std::max(speed, std::abs(v));
  int splits = 0;
  while (splits < 16 && speed > 0.0 && dt / (1 << splits) > 0.5 * h / speed) ++splits;
  int sub = 1 << splits;
  for (int s = 0; s < sub; ++s) liouville_step(state, dt / sub);
}

GridField marginal(const LiouvilleState& state, int k) {
  if (k < 1 || k > state.N) throw std::invalid_argument("marginal: rank out of range");
  if (k == state.N) return state.rhoN;
  // N=2 -> rank-1 marginal by quadrature over the trailing coordinate
  int m = state.m();
  GridField out(1, m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += state.rhoN.at(i, j);
    out.at(i) = s / m;
  }
  return out;
}

namespace {

double entropy_vs_product(const GridField& rho, const GridField& rhobar, int rank) {
  // integral rho log(rho / prod rhobar(x_i)) over the rank-dimensional grid
  if (rhobar.min() <= 0.0)
    throw std::invalid_argument("relative_entropy: reference density must be positive");
  double cell = std::pow(rho.h(), rho.dim);
  double acc = 0.0;
  int m = rho.n;
  if (rank == 1) {
    for (int i = 0; i < m; ++i) {
      double v = rho.at(i);
      if (v < 0.0) v = 0.0;
      if (v > 0.0) acc += v * std::log(v / rhobar.at(i)) * cell;
    }
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double v = rho.at(i, j);
        if (v < 0.0) v = 0.0;
        if (v > 0.0) acc += v * std::log(v / (rhobar.at(i) * rhobar.at(j))) * cell;
      }
  }
  return acc;
}

}  // namespace

double relative_entropy(const LiouvilleState& state, const GridField& rhobar) {
  GridField rb(1, state.m());
  for (int i = 0; i < state.m(); ++i)
    rb.at(i) = rhobar.interp(TorusPoint{static_cast<double>(i) / state.m(), 0.0});
  return entropy_vs_product(state.rhoN, rb, state.N) / state.N;
}

CkpPair ckp_check(const LiouvilleState& state, const GridField& rhobar, int k) {
  CkpPair out;
  GridField rb(1, state.m());
  for (int i = 0; i < state.m(); ++i)
    rb.at(i) = rhobar.interp(TorusPoint{static_cast<double>(i) / state.m(), 0.0});

  GridField marg = marginal(state, k);
  double l1 = 0.0;
  double cell = std::pow(marg.h(), marg.dim);
  if (k == 1) {
    for (int i = 0; i < marg.n; ++i) l1 += std::abs(marg.at(i) - rb.at(i)) * cell;
  } else {
    for (int i = 0; i < marg.n; ++i)
      for (int j = 0; j < marg.n; ++j)
        l1 += std::abs(marg.at(i, j) - rb.at(i) * rb.at(j)) * cell;
  }
  double ent_k = entropy_vs_product(marg, rb, k) / k;
  out.ckp_lhs = l1 * l1;
  out.ckp_rhs = 2.0 * k * ent_k;
  out.sub_lhs = ent_k;
  out.sub_rhs = entropy_vs_product(state.rhoN, rb, state.N) / state.N;
  return out;
}

}  // namespace mfl
