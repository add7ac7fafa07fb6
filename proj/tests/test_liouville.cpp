#include <cmath>

#include "doctest.h"
#include "meanfield/kernels.hpp"
#include "meanfield/liouville.hpp"
#include "meanfield/meanfield_pde.hpp"

using namespace mfl;

namespace {

GridField cosine_rho(int n, double amp) {
  GridField rho(1, n, 1.0);
  for (std::size_t j = 0; j < rho.size(); ++j)
    rho.values[j] += amp * std::cos(2.0 * M_PI * rho.point(j)[0]);
  double m = rho.mean();
  for (double& v : rho.values) v /= m;
  return rho;
}

}  // namespace

TEST_CASE("product initial data and marginals") {
  auto rho0 = cosine_rho(64, 0.3);
  auto st = make_liouville(2, 1, 64, 0.5, nullptr, rho0);
  CHECK(st.rhoN.mean() == doctest::Approx(1.0).epsilon(1e-12));
  auto m1 = marginal(st, 1);
  for (std::size_t j = 0; j < m1.size(); ++j)
    CHECK(m1.values[j] == doctest::Approx(rho0.values[j]).epsilon(1e-10));
  // relative entropy against its own marginal vanishes for product data
  CHECK(std::abs(relative_entropy(st, rho0)) < 1e-12);
}

TEST_CASE("zero-kernel Liouville flow stays a product of heat flows") {
  auto rho0 = cosine_rho(64, 0.3);
  auto st = make_liouville(2, 1, 64, 0.5, nullptr, rho0);
  PdeState ref;
  ref.rho = rho0;
  ref.sigma = 0.5;
  double dt = 1e-4;
  for (int s = 0; s < 100; ++s) {
    advance_liouville(st, dt);
    advance(ref, dt);
  }
  CHECK(st.rhoN.mean() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(relative_entropy(st, ref.rho)) < 1e-8);
  auto m1 = marginal(st, 1);
  for (std::size_t j = 0; j < m1.size(); ++j)
    CHECK(m1.values[j] == doctest::Approx(ref.rho.values[j]).epsilon(1e-8));
}

TEST_CASE("CKP inequality and entropy subadditivity") {
  auto kernel = build_kernel(KernelFamily::CosineTest, {}, 64);
  auto rho0 = cosine_rho(64, 0.3);
  auto st = make_liouville(2, 1, 64, 0.5, &kernel, rho0);
  // evolve the pair while comparing against a *frozen* reference so the
  // marginals genuinely drift away from rhobar
  for (int s = 0; s < 50; ++s) advance_liouville(st, 2e-4);
  auto pair = ckp_check(st, rho0);
  CHECK(pair.ckp_lhs <= pair.ckp_rhs + 1e-12);
  CHECK(pair.sub_lhs <= pair.sub_rhs + 1e-12);
  CHECK(pair.ckp_lhs > 0.0);
}

TEST_CASE("construction guards") {
  auto rho0 = cosine_rho(32, 0.1);
  CHECK_THROWS(make_liouville(3, 1, 32, 0.5, nullptr, rho0));  // N*d > 2
}
