#include <cmath>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/meanfield_pde.hpp"

using namespace mfl;

TEST_CASE("pure heat flow decays each mode exactly") {
  int n = 64;
  double sigma = 0.25, dt = 1e-4;
  PdeState st;
  st.rho = GridField(1, n, 1.0);
  st.sigma = sigma;
  for (std::size_t j = 0; j < st.rho.size(); ++j) {
    double x = st.rho.point(j)[0];
    st.rho.values[j] += 0.4 * std::cos(2.0 * M_PI * x) + 0.2 * std::cos(2.0 * M_PI * 3.0 * x);
  }
  double mass0 = st.rho.mean();
  for (int s = 0; s < 200; ++s) advance(st, dt);
  auto c = forward_transform(st.rho);
  double t = st.t;
  CHECK(c.at(1).real() ==
        doctest::Approx(0.2 * std::exp(-sigma * 4.0 * M_PI * M_PI * t)).epsilon(1e-10));
  CHECK(c.at(3).real() ==
        doctest::Approx(0.1 * std::exp(-sigma * 36.0 * M_PI * M_PI * t)).epsilon(1e-10));
  CHECK(std::abs(st.rho.mean() - mass0) < 1e-13);
}

TEST_CASE("uniform density is a fixed point for every kernel family") {
  for (auto fam : {KernelFamily::PeriodicLog, KernelFamily::Riesz, KernelFamily::CosineTest,
                   KernelFamily::Pks}) {
    auto kernel = build_kernel(fam, BuildParams{.s = 0.5, .lambda = 1.0}, 64);
    PdeState st;
    st.rho = GridField(1, 64, 1.0);
    st.sigma = 0.5;
    st.kernel = &kernel;
    for (int s = 0; s < 50; ++s) advance(st, 1e-3);
    double dev = 0.0;
    for (double v : st.rho.values) dev = std::max(dev, std::abs(v - 1.0));
    INFO(family_name(fam));
    CHECK(dev < 50 * 1e-13);
  }
}

TEST_CASE("velocity field of a cosine density under the cosine kernel") {
  auto kernel = build_kernel(KernelFamily::CosineTest, {}, 64);
  GridField rho(1, 64, 1.0);
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho.values[j] += 0.5 * std::cos(2.0 * M_PI * rho.point(j)[0]);
  // V*rho = 0.25 cos(2 pi x); u = -d/dx = 0.5 pi sin(2 pi x)
  auto u = velocity_field(rho, kernel);
  REQUIRE(u.size() == 1);
  for (std::size_t j = 0; j < rho.size(); ++j)
    CHECK(u[0].values[j] ==
          doctest::Approx(0.5 * M_PI * std::sin(2.0 * M_PI * rho.point(j)[0])).epsilon(1e-11));
}

TEST_CASE("free energy: closed forms and decay along the flow") {
  auto kernel = build_kernel(KernelFamily::PeriodicLog, {}, 128);
  PdeState st;
  st.rho = GridField(1, 128, 1.0);
  st.sigma = 0.5;
  st.kernel = &kernel;
  auto fe_uniform = free_energy(st);
  CHECK(std::abs(fe_uniform.entropy) < 1e-13);
  CHECK(std::abs(fe_uniform.interaction) < 1e-13);

  double a = 0.3;
  for (std::size_t j = 0; j < st.rho.size(); ++j)
    st.rho.values[j] += a * std::cos(2.0 * M_PI * st.rho.point(j)[0]);
  auto fe = free_energy(st);
  // interaction = (1/2) sum_{k=+-1} Vhat_k |a/2|^2 = Vhat_1 a^2 / 4
  CHECK(fe.interaction == doctest::Approx(0.5 * a * a / 4.0).epsilon(1e-12));

  double prev = fe.total;
  for (int s = 0; s < 100; ++s) {
    advance(st, 5e-4);
    double cur = free_energy(st).total;
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(st.floor_events == 0);
}

TEST_CASE("entropy throws on nonpositive density") {
  PdeState st;
  st.rho = GridField(1, 32, 1.0);
  st.rho.values[3] = -0.5;
  st.sigma = 0.1;
  CHECK_THROWS(free_energy(st));
}
