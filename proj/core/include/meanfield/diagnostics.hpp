// Modulated-energy diagnostics: Gibbs weights in log scale, the modulated
// potential energy K_N and its truncation, the Fisher dissipation D, the
// correction functional I_N, the Fourier control lemma, the convexity bound,
// the large-deviation functional with its Euler-Lagrange fixed point, and
// Wasserstein-1 distances.
//
// The central exact identity wired through this module: with
//   psi = (sigma/2) grad log rhobar + (1/2) grad(V * rhobar)
// and E_N = H_N + K_N, a Liouville evolution against the mean-field flow
// satisfies d/dt E_N = -D + I_N, so the master inequality
//   E_N(t) + int_0^t D <= E_N(0) + int_0^t I_N
// holds with equality up to discretization for smooth kernels.
#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "meanfield/kernels.hpp"
#include "meanfield/liouville.hpp"
#include "meanfield/particle_sim.hpp"
#include "meanfield/torus.hpp"

namespace mfl {

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // replica standard error; 0 for single samples
};

// Log-scale Gibbs weights; never exponentiated.
struct GibbsWeights {
  const KernelSpec* kernel = nullptr;
  double sigma = 0.0;
  int N = 0;
  GridField conv;               // V * rhobar
  double double_integral = 0.0; // integral of V * rhobar against rhobar

  struct Components {
    double pair_sum = 0.0;  // sum_{i != j} V(x_i - x_j)
    double conv_sum = 0.0;  // sum_i (V * rhobar)(x_i)
    double double_integral = 0.0;
  };
  Components components(std::span<const TorusPoint> X) const;

  // log G_N = -(1/(2 N sigma)) sum_{i != j} V(x_i - x_j)
  double log_gn(std::span<const TorusPoint> X) const;
  // log Gbar = -(1/sigma) sum_i V*rhobar(x_i) + (N/(2 sigma)) double_integral
  double log_gbar(std::span<const TorusPoint> X) const;
};

GibbsWeights make_gibbs_weights(const KernelSpec& kernel, const GridField& rhobar, double sigma,
                                int N);

// Mean-field reference bundle shared by the modulated estimators: the
// convolution field, psi, and the one-body/constant pieces of I_N.
struct MeanFieldRef {
  const KernelSpec* kernel = nullptr;
  double sigma = 0.0;
  GridField rhobar;
  GridField conv;                // V * rhobar
  double double_integral = 0.0;
  std::vector<GridField> psi;    // (sigma/2) grad log rhobar + (1/2) grad conv
  GridField gfield;              // g(x) = int grad V(x-y).(psi(x)-psi(y)) rhobar(y) dy
  double gconst = 0.0;           // double integral of grad V.(psi(x)-psi(y)) rhobar rhobar
};

MeanFieldRef make_meanfield_ref(const KernelSpec& kernel, const GridField& rhobar, double sigma);

// K_N per configuration:
// (1/(2 sigma)) [ (1/N^2) sum_{i!=j} V(x_i-x_j) - (2/N) sum_i V*rhobar(x_i) + dbl ].
double modulated_energy_config(std::span<const TorusPoint> X, const MeanFieldRef& ref);
Estimate modulated_energy(const EnsembleState& state, const MeanFieldRef& ref);
double modulated_energy(const LiouvilleState& state, const MeanFieldRef& ref);

// Smooth truncation profile: 1 on [0,1], C^infinity taper to 0 on [1,2].
double truncation_chi(double u);

// K_N^eta: same estimator with V replaced by V(x) chi(|x|/eta).
double truncated_energy_config(std::span<const TorusPoint> X, const MeanFieldRef& ref, double eta);
Estimate truncated_energy(const EnsembleState& state, const MeanFieldRef& ref, double eta);

// Replica mean of (1/N^2) sum_{i != j} V(x_i-x_j) 1_{|x_i-x_j| <= delta}.
Estimate close_pair_energy(const EnsembleState& state, const KernelSpec& kernel, double delta);

// D = (sigma/N) int rho_N |grad log(rho_N/rhobar_N) - grad log(G_N/Gbar_N)|^2.
double fisher_dissipation(const LiouvilleState& state, const MeanFieldRef& ref);

// I_N = -(1/sigma) int int grad V(x-y).(psi(x)-psi(y)) (dmu_N - drhobar)^{x2},
// diagonal excluded.
double i_n_config(std::span<const TorusPoint> X, const MeanFieldRef& ref);
Estimate i_n_functional(const EnsembleState& state, const MeanFieldRef& ref);
double i_n_functional(const LiouvilleState& state, const MeanFieldRef& ref);

struct MasterSeries {
  std::vector<double> t;
  std::vector<double> lhs;  // E_N(t) + int_0^t D
  std::vector<double> rhs;  // E_N(0) + int_0^t I_N
  double max_violation = 0.0;  // max over the grid of lhs - rhs
};

// Assemble both sides from sampled time series (trapezoid time quadrature).
MasterSeries master_inequality_check(std::span<const double> t, std::span<const double> e_n,
                                     std::span<const double> d, std::span<const double> i_n);

struct FourierLemmaResult {
  double max_ratio = 0.0;
  int used = 0;      // trials with RHS above the floor
  int trials = 0;
};

// Max over random zero-mass signed measures nu (point masses minus a smooth
// density) of LHS/RHS with LHS = -int int grad V(x-y).(psi(x)-psi(y)) nu nu
// and RHS = sum_k |nuhat(k)|^2 Vhat(k); with `augmented` the RHS carries the
// extra (1+|k|^{d-alpha})^{-1} term.
FourierLemmaResult fourier_lemma_check(const KernelSpec& kernel,
                                       const std::vector<GridField>& psi, int trials,
                                       std::uint64_t seed, bool augmented = false);

struct ConvexityResult {
  double lhs = 0.0;  // int psi_N drho_N
  double rhs = 0.0;  // (1/alpha) H_N + (1/(alpha N)) log E_rhobar exp(alpha N psi_N)
  bool reliable = true;  // false when the exponential moment is MC-degenerate
};

using ConfigFunction = std::function<double(std::span<const TorusPoint>)>;

ConvexityResult convexity_bound(const LiouvilleState& state, const GridField& rhobar,
                                const ConfigFunction& psi_n, double alpha, int samples,
                                std::uint64_t seed);

struct ZEstimate {
  double z = 0.0;       // (1/N) log E exp(-N E_W), E_W the off-diagonal W energy
  double ci_lo = 0.0;   // bootstrap 95% interval
  double ci_hi = 0.0;
  double ess = 0.0;     // effective sample size of the exponential weights
  double w_l1 = 0.0;    // ||W||_L1 of the grid table
  bool flagged = false; // ess < 100
};

ZEstimate large_deviation_z(const KernelSpec& w, const GridField& rhobar, int N, int samples,
                            std::uint64_t seed);

struct FixedPointResult {
  GridField u;
  double residual = 0.0;  // sup norm of u - RHS(u)
  double m_u = 1.0;       // int rhobar e^{2u}
  GridField maximizer;    // rhobar e^{2u} / M_u
  double i_value = 0.0;   // large-deviation functional at the maximizer
  int iterations = 0;
  bool converged = false;
};

// Damped iteration u <- (1-gamma) u + gamma (-W * (rhobar (e^{2u}/M_u - 1))).
FixedPointResult euler_lagrange_fixed_point(const KernelSpec& w, const GridField& rhobar,
                                            double tol = 1e-12, int max_iter = 500);

// Circular Wasserstein-1. d=1 exact (CDF formulation); d=2 sliced over 64
// integer directions (approximation).
double wasserstein1(const GridField& mu, const GridField& nu);
double wasserstein1(std::span<const TorusPoint> mu, const GridField& nu);
double wasserstein1(std::span<const TorusPoint> mu, std::span<const TorusPoint> nu, int dim);

// Percentile bootstrap (200 resamples, 95%) for the mean of `samples`.
std::pair<double, double> bootstrap_ci(std::span<const double> samples, std::uint64_t seed);

}  // namespace mfl
