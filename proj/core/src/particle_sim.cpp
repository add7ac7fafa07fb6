#include "meanfield/particle_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "meanfield/rng.hpp"

namespace mfl {

namespace {

constexpr std::uint64_t kInitStep = ~std::uint64_t{0};

// Piecewise-linear density between grid nodes; CDF inverted cell by cell.
double inverse_cdf_1d(const GridField& rho, double u) {
  int n = rho.n;
  double h = 1.0 / n;
  // cell masses of the piecewise-linear interpolant
  std::vector<double> cdf(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 0; j < n; ++j) {
    double a = rho.at(j), b = rho.at((j + 1) % n);
    cdf[static_cast<std::size_t>(j) + 1] = cdf[static_cast<std::size_t>(j)] + 0.5 * (a + b) * h;
  }
  double total = cdf.back();
  double target = u * total;
  int lo = 0, hi = n;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    (cdf[static_cast<std::size_t>(mid)] <= target ? lo : hi) = mid;
  }
  double a = rho.at(lo), b = rho.at((lo + 1) % n);
  double m = target - cdf[static_cast<std::size_t>(lo)];
  // solve a*t + (b-a)*t^2/2 = m/h for t in [0,1]
  double t;
  if (std::abs(b - a) < 1e-14 * (std::abs(a) + 1.0)) {
    t = a > 0 ? m / (h * a) : 0.5;
  } else {
    double disc = a * a + 2.0 * (b - a) * m / h;
    t = (-a + std::sqrt(std::max(disc, 0.0))) / (b - a);
  }
  t = std::clamp(t, 0.0, 1.0);
  return wrap1((lo + t) * h);
}

}  // namespace

double SimConfig::effective_sigma() const {
  return vanishing_sigma ? std::pow(static_cast<double>(N), -beta) : sigma;
}

void SimConfig::validate() const {
  if (N < 2) throw std::invalid_argument("SimConfig: N >= 2 required");
  if (R < 1) throw std::invalid_argument("SimConfig: R >= 1 required");
  if (!(dt > 0.0) || T < dt) throw std::invalid_argument("SimConfig: need dt > 0 and T >= dt");
  if (d < 1 || d > 2) throw std::invalid_argument("SimConfig: d must be 1 or 2");
  if (sigma < 0.0) throw std::invalid_argument("SimConfig: sigma >= 0 required");
  if (vanishing_sigma && !(beta > 0.0))
    throw std::invalid_argument("SimConfig: vanishing sigma schedule requires beta > 0");
  if (init == InitLaw::Density && init_density.n > 0) {
    if (init_density.min() < 0.0)
      throw std::invalid_argument("SimConfig: initial density has negative values");
    if (init_density.mean() <= 0.0)
      throw std::invalid_argument("SimConfig: initial density has zero mass");
  }
}

TorusPoint sample_from_density(const GridField& rho, std::uint64_t seed, std::uint64_t replica,
                               std::uint64_t particle) {
  if (rho.dim == 1) {
    double u = rng_u01(seed, replica, particle, kInitStep, 0);
    return {inverse_cdf_1d(rho, u), 0.0};
  }
  double m = rho.max();
  for (std::uint64_t attempt = 0;; ++attempt) {
    double x = rng_u01(seed, replica, particle, kInitStep, 3 * attempt + 1);
    double y = rng_u01(seed, replica, particle, kInitStep, 3 * attempt + 2);
    double v = rng_u01(seed, replica, particle, kInitStep, 3 * attempt + 3);
    TorusPoint p{wrap1(x), wrap1(y)};
    if (v * m <= rho.interp(p)) return p;
  }
}

EnsembleState init_ensemble(const SimConfig& config) {
  config.validate();
  EnsembleState st;
  st.N = config.N;
  st.d = config.d;
  st.positions.assign(static_cast<std::size_t>(config.R),
                      std::vector<TorusPoint>(static_cast<std::size_t>(config.N)));
  st.cap_events.assign(static_cast<std::size_t>(config.R), 0);

  GridField rho = config.init_density;
  if (config.init == InitLaw::Density && rho.n == 0) rho = GridField(config.d, 64, 1.0);

  for (int r = 0; r < config.R; ++r) {
    for (int i = 0; i < config.N; ++i) {
      TorusPoint p{0.0, 0.0};
      if (config.init == InitLaw::Lattice) {
        if (config.d == 1) {
          p[0] = static_cast<double>(i) / config.N;
        } else {
          int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.N))));
          p[0] = static_cast<double>(i / side) / side;
          p[1] = static_cast<double>(i % side) / side;
        }
      } else {
        p = sample_from_density(rho, config.seed, static_cast<std::uint64_t>(r),
                                static_cast<std::uint64_t>(i));
      }
      st.positions[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] = p;
    }
  }
  return st;
}

namespace {

void step_replica(EnsembleState& state, const SimConfig& config, int r) {
  auto& xs = state.positions[static_cast<std::size_t>(r)];
  int N = state.N, d = state.d;
  double sig = config.effective_sigma();
  double noise_scale = std::sqrt(2.0 * sig * config.dt);

  std::vector<std::array<double, 2>> force(static_cast<std::size_t>(N), {0.0, 0.0});
  if (config.kernel) {
    for (int i = 0; i < N; ++i) {
      // fixed summation order over j keeps the direct sum bitwise deterministic
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        auto disp = torus_displacement(xs[static_cast<std::size_t>(i)],
                                       xs[static_cast<std::size_t>(j)], d);
        auto fs = eval_force(*config.kernel, disp);
        if (fs.capped) ++state.cap_events[static_cast<std::size_t>(r)];
        for (int a = 0; a < d; ++a)
          force[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] +=
              fs.f[static_cast<std::size_t>(a)];
      }
    }
  }

  for (int i = 0; i < N; ++i) {
    std::array<double, 2> next{0.0, 0.0};
    for (int a = 0; a < d; ++a) {
      double drift = config.kernel
                         ? config.dt / N * force[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]
                         : 0.0;
      if (!std::isfinite(drift))
        throw std::runtime_error("particle_sim: non-finite force in replica " + std::to_string(r));
      double xi = sig > 0.0
                      ? rng_normal(config.seed, static_cast<std::uint64_t>(r),
                                   static_cast<std::uint64_t>(i), state.step_index,
                                   static_cast<std::uint64_t>(a))
                      : 0.0;
      next[static_cast<std::size_t>(a)] =
          xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] + drift + noise_scale * xi;
    }
    xs[static_cast<std::size_t>(i)] = wrap(next, d);
  }
}

void for_each_replica(EnsembleState& state, const SimConfig& config,
                      void (*fn)(EnsembleState&, const SimConfig&, int)) {
  int R = state.replicas();
  int workers = std::max(1, std::min(config.workers, R));
  if (workers == 1) {
    for (int r = 0; r < R; ++r) fn(state, config, r);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> fail{-1};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int r = w; r < R; r += workers) {
        try {
          fn(state, config, r);
        } catch (...) {
          fail.store(r);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (fail.load() >= 0)
    throw std::runtime_error("particle_sim: step failed in replica " + std::to_string(fail.load()));
}

}  // namespace

void step(EnsembleState& state, const SimConfig& config) {
  for_each_replica(state, config, &step_replica);
  state.step_index += 1;
  state.t += config.dt;
}

double min_interparticle_distance(const EnsembleState& state, int replica) {
  const auto& xs = state.positions[static_cast<std::size_t>(replica)];
  double best = 1.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      best = std::min(best, torus_norm(torus_displacement(xs[i], xs[j], state.d), state.d));
  return best;
}

std::vector<Snapshot> run(const SimConfig& config) {
  config.validate();
  EnsembleState st = init_ensemble(config);
  auto take = [&](std::vector<Snapshot>& out) {
    Snapshot s;
    s.t = st.t;
    s.state = st;
    s.min_dist_replica.resize(static_cast<std::size_t>(st.replicas()));
    s.min_dist = 1.0;
    for (int r = 0; r < st.replicas(); ++r) {
      double d = min_interparticle_distance(st, r);
      s.min_dist_replica[static_cast<std::size_t>(r)] = d;
      s.min_dist = std::min(s.min_dist, d);
    }
    out.push_back(std::move(s));
  };

  std::vector<Snapshot> snapshots;
  take(snapshots);
  long nsteps = std::lround(config.T / config.dt);
  for (long k = 1; k <= nsteps; ++k) {
    step(st, config);
    if (k % config.snapshot_stride == 0 || k == nsteps) take(snapshots);
  }
  return snapshots;
}

}  // namespace mfl
