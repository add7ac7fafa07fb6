// Grid solver for the N-particle Liouville equation at desk scale.
// The joint density lives on the (N*d)-dimensional torus grid; this build
// supports N*d <= 2 (N=2, d=1 is the primary target), which is what the
// exact entropy/energy diagnostics need.
#pragma once

#include "meanfield/kernels.hpp"
#include "meanfield/torus.hpp"

namespace mfl {

struct LiouvilleState {
  int N = 2;
  int d = 1;
  GridField rhoN;  // dim = N*d
  double t = 0.0;
  double sigma = 0.0;
  const KernelSpec* kernel = nullptr;
  std::vector<GridField> drift;  // per-axis drift on the product grid
  long floor_events = 0;

  int m() const { return rhoN.n; }
};

// Product initial data rho0^{tensor N}; rho0 is a 1-d density with unit mass.
LiouvilleState make_liouville(int N, int d, int m, double sigma, const KernelSpec* kernel,
                              const GridField& rho0);

void advance_liouville(LiouvilleState& state, double dt);

// Marginal at rank k (k = 1 gives a 1-d field; k = N returns the state).
GridField marginal(const LiouvilleState& state, int k);

// H_N = (1/N) integral rho_N log(rho_N / prod rhobar(x_i)), with 0 log 0 = 0.
double relative_entropy(const LiouvilleState& state, const GridField& rhobar);

struct CkpPair {
  double ckp_lhs = 0.0;  // || rho_{N,k} - rhobar^{(x)k} ||_1^2
  double ckp_rhs = 0.0;  // 2 * (1/k) * rank-k relative entropy
  double sub_lhs = 0.0;  // (1/k) rank-k relative entropy
  double sub_rhs = 0.0;  // (1/N) full relative entropy
};

CkpPair ckp_check(const LiouvilleState& state, const GridField& rhobar, int k = 1);

}  // namespace mfl
