#include <cmath>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/regularizer.hpp"

using namespace mfl;

namespace {

// Independent oracle: adaptive composite Simpson of the closed-form
// periodic-log potential over [lo, hi].
double simpson_log(double lo, double hi, int panels = 4096) {
  auto f = [](double x) { return -std::log(2.0 * std::abs(std::sin(M_PI * x))); };
  double acc = 0.0, w = (hi - lo) / panels;
  for (int i = 0; i < panels; ++i) {
    double a = lo + i * w, b = a + w;
    acc += (w / 6.0) * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
  }
  return acc;
}

}  // namespace

TEST_CASE("mollifier profile: support, mass, nonnegative transform") {
  auto m = make_mollifier(1);
  CHECK(m.khat(0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double xi = 0.0; xi < 80.0; xi += 0.37) CHECK(m.khat(xi) >= 0.0);
  // profile is K^1 at scale 1/2: support radius 1/2, unit mass, nonnegative
  CHECK(m.profile.mean() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m.profile.min() >= -1e-10);
  // C-infinity decay toward the support boundary at radius 1/2
  CHECK(std::abs(m.profile.interp({0.5, 0.0})) < 1e-8);
  CHECK(std::abs(m.profile.interp({0.48, 0.0})) < 1e-4);
}

TEST_CASE("ball mass against an adaptive quadrature oracle") {
  auto k = build_kernel(KernelFamily::PeriodicLog, {}, 1024);
  double delta = 1.0 / 32.0;
  // graded panels toward the endpoint singularity
  double oracle = 0.0, hi = delta;
  for (int j = 0; j < 48; ++j) {
    oracle += simpson_log(0.5 * hi, hi, 512);
    hi *= 0.5;
  }
  oracle *= 2.0;
  CHECK(ball_mass(k, delta) == doctest::Approx(oracle).epsilon(1e-9));
  // annulus test passes with C = 4 at this scale
  double ann = ball_mass(k, delta) - ball_mass(k, 0.5 * delta);
  CHECK(ball_mass(k, delta) <= 4.0 * ann);
}

TEST_CASE("delta sequence preconditions") {
  auto m = make_mollifier(1);
  auto cosine = build_kernel(KernelFamily::CosineTest, {}, 256);
  CHECK_THROWS(select_delta_sequence(cosine, m, 4.0, 0.1, 4));
  auto pks = build_kernel(KernelFamily::Pks, BuildParams{.lambda = 1.0}, 256);
  CHECK_THROWS(select_delta_sequence(pks, m, 4.0, 0.1, 4));
  auto plog = build_kernel(KernelFamily::PeriodicLog, {}, 256);
  CHECK_THROWS(select_delta_sequence(plog, m, 4.0, 0.3, 4));  // eps out of range
}

TEST_CASE("delta sequence recursion and annulus test") {
  auto m = make_mollifier(1);
  auto plog = build_kernel(KernelFamily::PeriodicLog, {}, 4096);
  bool truncated = false;
  auto deltas = select_delta_sequence(plog, m, 4.0, 0.2, 5, &truncated);
  REQUIRE_FALSE(deltas.empty());
  CHECK(deltas.front() <= 0.2 * 0.2 / 4.0);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i > 0) {
      CHECK(deltas[i] < deltas[i - 1]);
      double cap = std::min(compare_scale(plog, m, deltas[i - 1]),
                            std::pow(deltas[i - 1], 2.0 * plog.meta.k));
      CHECK(deltas[i] <= cap + 1e-15);
    }
    double mb = ball_mass(plog, deltas[i]);
    CHECK(mb <= 4.0 * (mb - ball_mass(plog, 0.5 * deltas[i])));
  }
}

TEST_CASE("regularized kernel properties at moderate resolution") {
  // eps^2/C must stay above the grid floor 2h, so 512 points pairs with eps=0.2
  auto plog = build_kernel(KernelFamily::PeriodicLog, {}, 512);
  auto reg = build_regularized(plog, 0.2, 4.0);
  CHECK(reg.report.min_mode >= -1e-10);
  CHECK(reg.report.max_excess <= 0.2 + 1e-3);
  CHECK(reg.smooth.r_min == 0.0);
  CHECK_FALSE(reg.smooth.grad_table.empty());
  // smooth kernel has the damped-rescaled coefficients, nonnegative
  for (const auto& mode : reg.smooth.spectral_table.modes) CHECK(mode.real() >= -1e-14);
  // mollification-rescale never amplifies a coefficient
  for (std::size_t j = 0; j < plog.spectral_table.size(); ++j)
    CHECK(reg.smooth.spectral_table.modes[j].real() <=
          plog.spectral_table.modes[j].real() + 1e-14);
}
