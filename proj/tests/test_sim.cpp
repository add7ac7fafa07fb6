#include <cmath>
#include <vector>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/particle_sim.hpp"
#include "meanfield/rng.hpp"

using namespace mfl;

TEST_CASE("counter rng: determinism, range, moments") {
  CHECK(counter_hash(1, 2, 3, 4, 5) == counter_hash(1, 2, 3, 4, 5));
  CHECK(counter_hash(1, 2, 3, 4, 5) != counter_hash(1, 2, 3, 4, 6));
  CHECK(mix64(42) == mix64(42));

  double mean = 0.0, var = 0.0;
  const int S = 100000;
  for (int i = 0; i < S; ++i) {
    double u = rng_u01(9, 0, 0, 0, static_cast<std::uint64_t>(i));
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
    double z = rng_normal(9, 1, 0, 0, static_cast<std::uint64_t>(i));
    mean += z;
    var += z * z;
  }
  mean /= S;
  var = var / S - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("density sampling follows the target CDF") {
  GridField rho(1, 256, 1.0);
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho.values[j] += 0.3 * std::cos(2.0 * M_PI * rho.point(j)[0]);
  const int S = 20000;
  // compare empirical CDF with the closed-form CDF x + 0.3 sin(2 pi x)/(2 pi)
  std::vector<double> xs;
  xs.reserve(S);
  for (int i = 0; i < S; ++i)
    xs.push_back(sample_from_density(rho, 11, 0, static_cast<std::uint64_t>(i))[0]);
  std::sort(xs.begin(), xs.end());
  double worst = 0.0;
  for (int i = 0; i < S; ++i) {
    double cdf = xs[static_cast<std::size_t>(i)] +
                 0.3 * std::sin(2.0 * M_PI * xs[static_cast<std::size_t>(i)]) / (2.0 * M_PI);
    worst = std::max(worst, std::abs(cdf - (i + 0.5) / S));
  }
  CHECK(worst < 0.015);
}

TEST_CASE("trajectories are bitwise identical across worker counts") {
  auto kernel = build_kernel(KernelFamily::PeriodicLog, {}, 128);
  SimConfig cfg;
  cfg.N = 24;
  cfg.sigma = 0.5;
  cfg.dt = 1e-3;
  cfg.T = 0.02;
  cfg.R = 8;
  cfg.seed = 1234;
  cfg.kernel = &kernel;
  cfg.snapshot_stride = 5;

  cfg.workers = 1;
  auto a = run(cfg);
  cfg.workers = 4;
  auto b = run(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t s = 0; s < a.size(); ++s)
    for (int r = 0; r < cfg.R; ++r)
      for (int i = 0; i < cfg.N; ++i) {
        CHECK(a[s].state.positions[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)][0] ==
              b[s].state.positions[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)][0]);
      }
}

TEST_CASE("zero-kernel diffusion matches the explicit one-step map") {
  SimConfig cfg;
  cfg.N = 4;
  cfg.sigma = 0.25;
  cfg.dt = 1e-3;
  cfg.T = 1e-3;
  cfg.R = 1;
  cfg.seed = 77;
  cfg.init = InitLaw::Lattice;
  auto ens = init_ensemble(cfg);
  auto before = ens.positions[0];
  step(ens, cfg);
  for (int i = 0; i < cfg.N; ++i) {
    double z = rng_normal(cfg.seed, 0, static_cast<std::uint64_t>(i), 0, 0);
    double expect = wrap1(before[static_cast<std::size_t>(i)][0] +
                          std::sqrt(2.0 * cfg.sigma * cfg.dt) * z);
    CHECK(ens.positions[0][static_cast<std::size_t>(i)][0] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("lattice init and minimum distance bookkeeping") {
  SimConfig cfg;
  cfg.N = 16;
  cfg.init = InitLaw::Lattice;
  auto ens = init_ensemble(cfg);
  CHECK(min_interparticle_distance(ens, 0) == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("vanishing sigma mode") {
  SimConfig cfg;
  cfg.N = 16;
  cfg.vanishing_sigma = true;
  cfg.beta = 0.5;
  CHECK(cfg.effective_sigma() == doctest::Approx(0.25));
  cfg.vanishing_sigma = false;
  cfg.sigma = 0.7;
  CHECK(cfg.effective_sigma() == doctest::Approx(0.7));
}

TEST_CASE("run is reproducible for a fixed seed") {
  auto kernel = build_kernel(KernelFamily::CosineTest, {}, 64);
  SimConfig cfg;
  cfg.N = 8;
  cfg.R = 3;
  cfg.dt = 1e-3;
  cfg.T = 0.01;
  cfg.seed = 5;
  cfg.kernel = &kernel;
  auto a = run(cfg);
  auto b = run(cfg);
  REQUIRE(a.size() == b.size());
  CHECK(a.back().min_dist == b.back().min_dist);
  CHECK(a.back().state.positions == b.back().state.positions);
}
