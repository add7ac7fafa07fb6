#include "meanfield/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "meanfield/rng.hpp"

namespace mfl {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

Estimate replica_estimate(const std::vector<double>& vals) {
  Estimate e;
  auto R = static_cast<double>(vals.size());
  for (double v : vals) e.value += v;
  e.value /= R;
  if (vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / (R - 1.0) / R);
  }
  return e;
}

double logsumexp(std::span<const double> v) {
  double m = -1e300;
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void require_liouville_pair(const LiouvilleState& st, const char* who) {
  if (st.N != 2 || st.d != 1)
    throw std::invalid_argument(std::string(who) + ": exact path needs N=2, d=1");
}

}  // namespace

GibbsWeights::Components GibbsWeights::components(std::span<const TorusPoint> X) const {
  Components c;
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = i + 1; j < X.size(); ++j) {
      auto r = torus_displacement(X[i], X[j], kernel->dim);
      c.pair_sum += 2.0 * kernel->eval_potential(r);  // both orders, V even
    }
    c.conv_sum += conv.interp(X[i]);
  }
  c.double_integral = double_integral;
  return c;
}

double GibbsWeights::log_gn(std::span<const TorusPoint> X) const {
  return -components(X).pair_sum / (2.0 * static_cast<double>(N) * sigma);
}

double GibbsWeights::log_gbar(std::span<const TorusPoint> X) const {
  auto c = components(X);
  return -c.conv_sum / sigma + static_cast<double>(N) * double_integral / (2.0 * sigma);
}

GibbsWeights make_gibbs_weights(const KernelSpec& kernel, const GridField& rhobar, double sigma,
                                int N) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("make_gibbs_weights: weights are 1/sigma-scaled; sigma > 0 required");
  if (rhobar.min() <= 0.0)
    throw std::invalid_argument("make_gibbs_weights: rhobar must be strictly positive");
  if (rhobar.dim != kernel.dim || rhobar.n != kernel.n)
    throw std::invalid_argument("make_gibbs_weights: rhobar grid must match the kernel table");
  GibbsWeights w;
  w.kernel = &kernel;
  w.sigma = sigma;
  w.N = N;
  w.conv = convolve(kernel.spectral_table, rhobar);
  double acc = 0.0;
  for (std::size_t j = 0; j < rhobar.size(); ++j) acc += w.conv.values[j] * rhobar.values[j];
  w.double_integral = acc / static_cast<double>(rhobar.size());
  return w;
}

MeanFieldRef make_meanfield_ref(const KernelSpec& kernel, const GridField& rhobar, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("make_meanfield_ref: sigma > 0 required");
  if (rhobar.min() <= 0.0)
    throw std::invalid_argument("make_meanfield_ref: rhobar must be strictly positive");
  if (rhobar.dim != kernel.dim || rhobar.n != kernel.n)
    throw std::invalid_argument("make_meanfield_ref: rhobar grid must match the kernel table");

  MeanFieldRef ref;
  ref.kernel = &kernel;
  ref.sigma = sigma;
  ref.rhobar = rhobar;
  ref.conv = convolve(kernel.spectral_table, rhobar);
  double acc = 0.0;
  for (std::size_t j = 0; j < rhobar.size(); ++j) acc += ref.conv.values[j] * rhobar.values[j];
  ref.double_integral = acc / static_cast<double>(rhobar.size());

  GridField logr = rhobar;
  for (double& v : logr.values) v = std::log(v);
  auto grad_logr = spectral_gradient(logr);
  auto grad_conv = spectral_gradient(ref.conv);
  ref.psi.resize(static_cast<std::size_t>(kernel.dim));
  for (int a = 0; a < kernel.dim; ++a) {
    auto au = static_cast<std::size_t>(a);
    ref.psi[au] = GridField(kernel.dim, kernel.n);
    for (std::size_t j = 0; j < rhobar.size(); ++j)
      ref.psi[au].values[j] =
          0.5 * sigma * grad_logr[au].values[j] + 0.5 * grad_conv[au].values[j];
  }

  // g(x) = psi(x).grad conv(x) - sum_a (d_a V * (psi_a rhobar))(x); the second
  // term differentiates V against smooth coefficients, which converges without
  // filtering.
  ref.gfield = GridField(kernel.dim, kernel.n);
  for (int a = 0; a < kernel.dim; ++a) {
    auto au = static_cast<std::size_t>(a);
    GridField pr(kernel.dim, kernel.n);
    for (std::size_t j = 0; j < rhobar.size(); ++j)
      pr.values[j] = ref.psi[au].values[j] * rhobar.values[j];
    auto conv_pr = convolve_coeffs(kernel.spectral_table, forward_transform(pr));
    GridField t = inverse_transform(spectral_gradient_coeffs(conv_pr)[au]);
    for (std::size_t j = 0; j < rhobar.size(); ++j)
      ref.gfield.values[j] += ref.psi[au].values[j] * grad_conv[au].values[j] - t.values[j];
  }
  acc = 0.0;
  for (std::size_t j = 0; j < rhobar.size(); ++j) {
    double dot = 0.0;
    for (int a = 0; a < kernel.dim; ++a)
      dot += ref.psi[static_cast<std::size_t>(a)].values[j] *
             grad_conv[static_cast<std::size_t>(a)].values[j];
    acc += rhobar.values[j] * dot;
  }
  ref.gconst = 2.0 * acc / static_cast<double>(rhobar.size());
  return ref;
}

double modulated_energy_config(std::span<const TorusPoint> X, const MeanFieldRef& ref) {
  auto N = static_cast<double>(X.size());
  double pair = 0.0, cs = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = i + 1; j < X.size(); ++j)
      pair += 2.0 * ref.kernel->eval_potential(torus_displacement(X[i], X[j], ref.kernel->dim));
    cs += ref.conv.interp(X[i]);
  }
  return (pair / (N * N) - 2.0 * cs / N + ref.double_integral) / (2.0 * ref.sigma);
}

Estimate modulated_energy(const EnsembleState& state, const MeanFieldRef& ref) {
  std::vector<double> vals;
  vals.reserve(state.positions.size());
  for (const auto& xs : state.positions) vals.push_back(modulated_energy_config(xs, ref));
  return replica_estimate(vals);
}

double modulated_energy(const LiouvilleState& state, const MeanFieldRef& ref) {
  require_liouville_pair(state, "modulated_energy");
  int m = state.m();
  double cell = 1.0 / (static_cast<double>(m) * m);
  std::vector<double> c(static_cast<std::size_t>(m)), vrow(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    TorusPoint p{static_cast<double>(i) / m, 0.0};
    c[static_cast<std::size_t>(i)] = ref.conv.interp(p);
    vrow[static_cast<std::size_t>(i)] =
        ref.kernel->grid_table.interp(TorusPoint{torus_displacement1(p[0], 0.0), 0.0});
  }
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int dij = i - j;
      if (dij < 0) dij += m;
      double kcfg = (0.5 * vrow[static_cast<std::size_t>(dij)] -
                     (c[static_cast<std::size_t>(i)] + c[static_cast<std::size_t>(j)]) +
                     ref.double_integral) /
                    (2.0 * ref.sigma);
      acc += state.rhoN.at(i, j) * kcfg * cell;
    }
  return acc;
}

double truncation_chi(double u) {
  u = std::abs(u);
  if (u <= 1.0) return 1.0;
  if (u >= 2.0) return 0.0;
  auto f = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  double t = u - 1.0;
  return f(1.0 - t) / (f(t) + f(1.0 - t));
}

namespace {

// V(x) chi(|x|/eta) as a kernel table plus its mean-field convolution pieces.
struct TruncatedRef {
  GridField vchi;
  GridField conv;
  double dbl = 0.0;
  double eta = 0.0;
  const MeanFieldRef* base = nullptr;

  TruncatedRef(const MeanFieldRef& ref, double eta_) : eta(eta_), base(&ref) {
    const auto& kern = *ref.kernel;
    vchi = kern.grid_table;
    for (std::size_t j = 0; j < vchi.size(); ++j) {
      auto r = torus_displacement(vchi.point(j), TorusPoint{0.0, 0.0}, kern.dim);
      vchi.values[j] *= truncation_chi(torus_norm(r, kern.dim) / eta);
    }
    conv = convolve(forward_transform(vchi), ref.rhobar);
    double acc = 0.0;
    for (std::size_t j = 0; j < conv.size(); ++j) acc += conv.values[j] * ref.rhobar.values[j];
    dbl = acc / static_cast<double>(conv.size());
  }

  double config(std::span<const TorusPoint> X) const {
    const auto& kern = *base->kernel;
    auto N = static_cast<double>(X.size());
    double pair = 0.0, cs = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      for (std::size_t j = i + 1; j < X.size(); ++j) {
        auto r = torus_displacement(X[i], X[j], kern.dim);
        pair += 2.0 * kern.eval_potential(r) * truncation_chi(torus_norm(r, kern.dim) / eta);
      }
      cs += conv.interp(X[i]);
    }
    return (pair / (N * N) - 2.0 * cs / N + dbl) / (2.0 * base->sigma);
  }
};

}  // namespace

double truncated_energy_config(std::span<const TorusPoint> X, const MeanFieldRef& ref,
                               double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("truncated_energy: eta > 0 required");
  return TruncatedRef(ref, eta).config(X);
}

Estimate truncated_energy(const EnsembleState& state, const MeanFieldRef& ref, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("truncated_energy: eta > 0 required");
  TruncatedRef tr(ref, eta);
  std::vector<double> vals;
  vals.reserve(state.positions.size());
  for (const auto& xs : state.positions) vals.push_back(tr.config(xs));
  return replica_estimate(vals);
}

Estimate close_pair_energy(const EnsembleState& state, const KernelSpec& kernel, double delta) {
  if (delta < 2.0 * kernel.h())
    throw std::invalid_argument("close_pair_energy: delta >= 2h required");
  std::vector<double> vals;
  vals.reserve(state.positions.size());
  for (const auto& xs : state.positions) {
    auto N = static_cast<double>(xs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        auto r = torus_displacement(xs[i], xs[j], kernel.dim);
        if (torus_norm(r, kernel.dim) <= delta) acc += 2.0 * kernel.eval_potential(r);
      }
    vals.push_back(acc / (N * N));
  }
  return replica_estimate(vals);
}

double fisher_dissipation(const LiouvilleState& state, const MeanFieldRef& ref) {
  require_liouville_pair(state, "fisher_dissipation");
  if (state.rhoN.min() <= 0.0)
    throw std::invalid_argument("fisher_dissipation: density must be positive everywhere");
  int m = state.m();
  double sigma = ref.sigma;
  std::vector<double> logr(static_cast<std::size_t>(m)), c(static_cast<std::size_t>(m)),
      vrow(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    TorusPoint p{static_cast<double>(i) / m, 0.0};
    double rb = ref.rhobar.interp(p);
    if (rb <= 0.0) throw std::invalid_argument("fisher_dissipation: rhobar must be positive");
    logr[static_cast<std::size_t>(i)] = std::log(rb);
    c[static_cast<std::size_t>(i)] = ref.conv.interp(p);
    vrow[static_cast<std::size_t>(i)] =
        ref.kernel->grid_table.interp(TorusPoint{torus_displacement1(p[0], 0.0), 0.0});
  }
  // F = log(rho_N / (rhobar_N G_N / Gbar_N))
  GridField F(2, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int dij = i - j;
      if (dij < 0) dij += m;
      F.at(i, j) = std::log(state.rhoN.at(i, j)) - logr[static_cast<std::size_t>(i)] -
                   logr[static_cast<std::size_t>(j)] +
                   vrow[static_cast<std::size_t>(dij)] / (2.0 * sigma) -
                   (c[static_cast<std::size_t>(i)] + c[static_cast<std::size_t>(j)]) / sigma +
                   ref.double_integral / sigma;
    }
  auto grad = spectral_gradient(F);
  double cell = 1.0 / (static_cast<double>(m) * m);
  double acc = 0.0;
  for (std::size_t j = 0; j < F.size(); ++j) {
    double g2 = grad[0].values[j] * grad[0].values[j] + grad[1].values[j] * grad[1].values[j];
    acc += state.rhoN.values[j] * g2 * cell;
  }
  return sigma / static_cast<double>(state.N) * acc;
}

double i_n_config(std::span<const TorusPoint> X, const MeanFieldRef& ref) {
  auto N = static_cast<double>(X.size());
  int dim = ref.kernel->dim;
  double s_mumu = 0.0, s_murho = 0.0;
  std::vector<std::array<double, 2>> psis(X.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < X.size(); ++i)
    for (int a = 0; a < dim; ++a)
      psis[i][static_cast<std::size_t>(a)] = ref.psi[static_cast<std::size_t>(a)].interp(X[i]);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = i + 1; j < X.size(); ++j) {
      auto f = eval_force(*ref.kernel, torus_displacement(X[i], X[j], dim));
      double dot = 0.0;
      for (int a = 0; a < dim; ++a) {
        auto au = static_cast<std::size_t>(a);
        dot += -f.f[au] * (psis[i][au] - psis[j][au]);  // grad V = -K
      }
      s_mumu += 2.0 * dot;  // (i,j) and (j,i) contribute equally
    }
    s_murho += ref.gfield.interp(X[i]);
  }
  s_mumu /= N * N;
  s_murho /= N;
  return -(s_mumu - 2.0 * s_murho + ref.gconst) / ref.sigma;
}

Estimate i_n_functional(const EnsembleState& state, const MeanFieldRef& ref) {
  std::vector<double> vals;
  vals.reserve(state.positions.size());
  for (const auto& xs : state.positions) vals.push_back(i_n_config(xs, ref));
  return replica_estimate(vals);
}

double i_n_functional(const LiouvilleState& state, const MeanFieldRef& ref) {
  require_liouville_pair(state, "i_n_functional");
  int m = state.m();
  double cell = 1.0 / (static_cast<double>(m) * m);
  std::vector<double> psi1(static_cast<std::size_t>(m)), g(static_cast<std::size_t>(m)),
      gradv(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    TorusPoint p{static_cast<double>(i) / m, 0.0};
    psi1[static_cast<std::size_t>(i)] = ref.psi[0].interp(p);
    g[static_cast<std::size_t>(i)] = ref.gfield.interp(p);
    double disp = torus_displacement1(p[0], 0.0);
    gradv[static_cast<std::size_t>(i)] =
        i == 0 ? 0.0 : -eval_force(*ref.kernel, {disp, 0.0}).f[0];
  }
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      int dij = i - j;
      if (dij < 0) dij += m;
      double s_mumu = 0.5 * gradv[static_cast<std::size_t>(dij)] *
                      (psi1[static_cast<std::size_t>(i)] - psi1[static_cast<std::size_t>(j)]);
      double s_murho = 0.5 * (g[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)]);
      double icfg = -(s_mumu - 2.0 * s_murho + ref.gconst) / ref.sigma;
      acc += state.rhoN.at(i, j) * icfg * cell;
    }
  return acc;
}

MasterSeries master_inequality_check(std::span<const double> t, std::span<const double> e_n,
                                     std::span<const double> d, std::span<const double> i_n) {
  if (t.size() != e_n.size() || t.size() != d.size() || t.size() != i_n.size() || t.empty())
    throw std::invalid_argument("master_inequality_check: mismatched series");
  MasterSeries out;
  out.t.assign(t.begin(), t.end());
  out.lhs.resize(t.size());
  out.rhs.resize(t.size());
  double int_d = 0.0, int_i = 0.0;
  out.lhs[0] = e_n[0];
  out.rhs[0] = e_n[0];
  out.max_violation = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    double dt = t[k] - t[k - 1];
    int_d += 0.5 * dt * (d[k] + d[k - 1]);
    int_i += 0.5 * dt * (i_n[k] + i_n[k - 1]);
    out.lhs[k] = e_n[k] + int_d;
    out.rhs[k] = e_n[0] + int_i;
    out.max_violation = std::max(out.max_violation, out.lhs[k] - out.rhs[k]);
  }
  return out;
}

FourierLemmaResult fourier_lemma_check(const KernelSpec& kernel,
                                       const std::vector<GridField>& psi, int trials,
                                       std::uint64_t seed, bool augmented) {
  if (psi.size() != static_cast<std::size_t>(kernel.dim))
    throw std::invalid_argument("fourier_lemma_check: psi component count mismatch");
  FourierLemmaResult res;
  res.trials = trials;
  int dim = kernel.dim, n = kernel.n;
  for (int trial = 0; trial < trials; ++trial) {
    auto tr = static_cast<std::uint64_t>(trial);
    // Atomic part: 8..32 points, weight 1/natoms each.
    int natoms = 8 + static_cast<int>(counter_hash(seed, tr, 0, 0, 0) % 25);
    std::vector<TorusPoint> atoms(static_cast<std::size_t>(natoms));
    for (int i = 0; i < natoms; ++i) {
      auto iu = static_cast<std::uint64_t>(i);
      atoms[static_cast<std::size_t>(i)] = {wrap1(rng_u01(seed, tr, iu, 1, 0)),
                                            dim == 2 ? wrap1(rng_u01(seed, tr, iu, 1, 1)) : 0.0};
    }
    // Smooth part: random low-mode perturbation of the uniform density.
    GridField q(dim, n, 1.0);
    for (int mode = 1; mode <= 4; ++mode) {
      auto mu = static_cast<std::uint64_t>(mode);
      double amp = 0.15 * (rng_u01(seed, tr, mu, 2, 0) - 0.5);
      double phase = kTwoPi * rng_u01(seed, tr, mu, 2, 1);
      int k2 = dim == 2 ? static_cast<int>(counter_hash(seed, tr, mu, 2, 2) % 3) - 1 : 0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        TorusPoint x = q.point(j);
        q.values[j] += amp * std::cos(kTwoPi * (mode * x[0] + k2 * x[1]) + phase);
      }
    }
    double qm = q.mean();
    for (double& v : q.values) v /= qm;

    SpectralCoeffs nu_hat = empirical_fourier(atoms, dim, n);
    SpectralCoeffs q_hat = forward_transform(q);
    for (std::size_t j = 0; j < nu_hat.size(); ++j) nu_hat.modes[j] -= q_hat.modes[j];

    // LHS = -2 int psi . grad(V * nu) dnu.
    auto conv_nu = convolve_coeffs(kernel.spectral_table, nu_hat);
    auto grads = spectral_gradient_coeffs(conv_nu);
    // LHS as the Fourier-side pair sum sum_{zeta,xi} i 2pi zeta_a Vhat(zeta)
    // psihat(xi - zeta) nuhat(zeta) conj(nuhat(xi)) with BOTH frequencies
    // restricted to the resolved band (Nyquist excluded). Pairs that cross
    // the truncation edge carry the uncancelled weight |zeta Vhat(zeta)|,
    // an O(n) artifact of truncating V rather than a property of the kernel,
    // and make the trial ratios drift without bound.
    double lhs = 0.0;
    for (int a = 0; a < dim; ++a) {
      auto au = static_cast<std::size_t>(a);
      SpectralCoeffs psi_hat = forward_transform(psi[au]);
      cplx acc{0.0, 0.0};
      for (std::size_t jz = 0; jz < grads[au].size(); ++jz) {
        if (grads[au].modes[jz] == cplx{0.0, 0.0}) continue;
        auto kz = grads[au].mode_vec(jz);
        for (std::size_t jm = 0; jm < psi_hat.size(); ++jm) {
          if (std::norm(psi_hat.modes[jm]) < 1e-28) continue;
          auto km = psi_hat.mode_vec(jm);
          std::array<int, 2> kt{kz[0] + km[0], kz[1] + km[1]};
          bool in_band = kt[0] > -n / 2 && kt[0] < n / 2;
          if (dim == 2) in_band = in_band && kt[1] > -n / 2 && kt[1] < n / 2;
          if (!in_band) continue;
          cplx nub = dim == 1 ? nu_hat.at(kt[0]) : nu_hat.at(kt[0], kt[1]);
          acc += psi_hat.modes[jm] * grads[au].modes[jz] * std::conj(nub);
        }
      }
      lhs += -2.0 * acc.real();
    }

    double rhs = 0.0;
    for (std::size_t j = 0; j < nu_hat.size(); ++j) {
      double p = std::norm(nu_hat.modes[j]);
      rhs += p * kernel.spectral_table.modes[j].real();
      if (augmented)
        rhs += p / (1.0 + std::pow(nu_hat.mode_norm2(j), 0.5 * (dim - kernel.meta.alpha)));
    }
    if (rhs <= 1e-14) continue;
    res.max_ratio = std::max(res.max_ratio, lhs / rhs);
    ++res.used;
  }
  return res;
}

ConvexityResult convexity_bound(const LiouvilleState& state, const GridField& rhobar,
                                const ConfigFunction& psi_n, double alpha, int samples,
                                std::uint64_t seed) {
  require_liouville_pair(state, "convexity_bound");
  if (!(alpha > 0.0)) throw std::invalid_argument("convexity_bound: alpha > 0 required");
  ConvexityResult out;
  int m = state.m();
  auto N = static_cast<double>(state.N);
  double cell = 1.0 / (static_cast<double>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      std::array<TorusPoint, 2> X{TorusPoint{static_cast<double>(i) / m, 0.0},
                                  TorusPoint{static_cast<double>(j) / m, 0.0}};
      out.lhs += state.rhoN.at(i, j) * psi_n(X) * cell;
    }

  double hn = relative_entropy(state, rhobar);
  std::vector<double> expo(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    std::array<TorusPoint, 2> X;
    for (int i = 0; i < state.N; ++i)
      X[static_cast<std::size_t>(i)] = sample_from_density(
          rhobar, seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i));
    expo[static_cast<std::size_t>(s)] = alpha * N * psi_n(X);
  }
  double lme = logsumexp(expo) - std::log(static_cast<double>(samples));
  out.rhs = hn / alpha + lme / (alpha * N);

  double mx = *std::max_element(expo.begin(), expo.end());
  double sw = 0.0, sw2 = 0.0;
  for (double e : expo) {
    double w = std::exp(e - mx);
    sw += w;
    sw2 += w * w;
  }
  out.reliable = (sw * sw / sw2) >= 100.0;
  return out;
}

ZEstimate large_deviation_z(const KernelSpec& w, const GridField& rhobar, int N, int samples,
                            std::uint64_t seed) {
  if (N > 256) throw std::invalid_argument("large_deviation_z: N <= 256 required");
  if (samples < 100) throw std::invalid_argument("large_deviation_z: too few samples");
  ZEstimate out;
  for (double v : w.grid_table.values) out.w_l1 += std::abs(v);
  out.w_l1 /= static_cast<double>(w.grid_table.size());

  GridField conv = convolve(w.spectral_table, rhobar);
  double dbl = 0.0;
  for (std::size_t j = 0; j < rhobar.size(); ++j) dbl += conv.values[j] * rhobar.values[j];
  dbl /= static_cast<double>(rhobar.size());

  auto Nd = static_cast<double>(N);
  std::vector<double> expo(static_cast<std::size_t>(samples));
  std::vector<TorusPoint> X(static_cast<std::size_t>(N));
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < N; ++i)
      X[static_cast<std::size_t>(i)] = sample_from_density(
          rhobar, seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i));
    double pair = 0.0, cs = 0.0;
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j)
        pair += 2.0 * w.eval_potential(torus_displacement(X[static_cast<std::size_t>(i)],
                                                          X[static_cast<std::size_t>(j)], w.dim));
      cs += conv.interp(X[static_cast<std::size_t>(i)]);
    }
    double e_w = pair / (Nd * Nd) - 2.0 * cs / Nd + dbl;
    expo[static_cast<std::size_t>(s)] = -Nd * e_w;
  }

  auto z_of = [&](std::span<const double> e) {
    return (logsumexp(e) - std::log(static_cast<double>(e.size()))) / Nd;
  };
  out.z = z_of(expo);

  double mx = *std::max_element(expo.begin(), expo.end());
  double sw = 0.0, sw2 = 0.0;
  for (double e : expo) {
    double wgt = std::exp(e - mx);
    sw += wgt;
    sw2 += wgt * wgt;
  }
  out.ess = sw * sw / sw2;
  out.flagged = out.ess < 100.0;

  constexpr int kBoot = 200;
  std::vector<double> zb(kBoot);
  std::vector<double> re(expo.size());
  for (int b = 0; b < kBoot; ++b) {
    for (std::size_t i = 0; i < re.size(); ++i) {
      auto pick = static_cast<std::size_t>(
          rng_u01(seed ^ 0x626f6f74ULL, static_cast<std::uint64_t>(b), i, 0, 0) * expo.size());
      re[i] = expo[std::min(pick, expo.size() - 1)];
    }
    zb[static_cast<std::size_t>(b)] = z_of(re);
  }
  std::sort(zb.begin(), zb.end());
  out.ci_lo = zb[4];    // 2.5th percentile of 200
  out.ci_hi = zb[194];  // 97.5th percentile
  return out;
}

FixedPointResult euler_lagrange_fixed_point(const KernelSpec& w, const GridField& rhobar,
                                            double tol, int max_iter) {
  if (rhobar.min() <= 0.0)
    throw std::invalid_argument("euler_lagrange_fixed_point: rhobar must be positive");
  if (rhobar.dim != w.dim || rhobar.n != w.n)
    throw std::invalid_argument("euler_lagrange_fixed_point: rhobar grid must match the kernel");
  FixedPointResult res;
  res.u = GridField(w.dim, w.n, 0.0);
  double gamma = 0.5;
  double prev_res = 1e300;
  int growth_streak = 0;

  auto rhs_of = [&](const GridField& u, double& m_u) {
    GridField e2(w.dim, w.n);
    m_u = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      e2.values[j] = rhobar.values[j] * std::exp(2.0 * u.values[j]);
      m_u += e2.values[j];
    }
    m_u /= static_cast<double>(u.size());
    for (std::size_t j = 0; j < u.size(); ++j)
      e2.values[j] = e2.values[j] / m_u - rhobar.values[j];
    GridField r = convolve(w.spectral_table, e2);
    for (double& v : r.values) v = -v;
    return r;
  };

  for (int it = 1; it <= max_iter; ++it) {
    GridField rhs = rhs_of(res.u, res.m_u);
    double rnorm = 0.0;
    for (std::size_t j = 0; j < rhs.size(); ++j)
      rnorm = std::max(rnorm, std::abs(res.u.values[j] - rhs.values[j]));
    res.residual = rnorm;
    res.iterations = it;
    if (rnorm <= tol) {
      res.converged = true;
      break;
    }
    if (rnorm > prev_res) {
      gamma *= 0.5;
      if (++growth_streak >= 20) break;  // divergence: abort and report
    } else {
      growth_streak = 0;
    }
    prev_res = rnorm;
    for (std::size_t j = 0; j < res.u.size(); ++j)
      res.u.values[j] = (1.0 - gamma) * res.u.values[j] + gamma * rhs.values[j];
  }

  res.maximizer = GridField(w.dim, w.n);
  double m_u = 0.0;
  for (std::size_t j = 0; j < res.u.size(); ++j) {
    res.maximizer.values[j] = rhobar.values[j] * std::exp(2.0 * res.u.values[j]);
    m_u += res.maximizer.values[j];
  }
  m_u /= static_cast<double>(res.u.size());
  res.m_u = m_u;
  for (double& v : res.maximizer.values) v /= m_u;

  // I(F) at the maximizer: -(F(mu) + KL(mu | rhobar)).
  SpectralCoeffs mu_hat = forward_transform(res.maximizer);
  double f_mu = 0.0;
  for (std::size_t j = 0; j < mu_hat.size(); ++j)
    f_mu += w.spectral_table.modes[j].real() * std::norm(mu_hat.modes[j]);
  double kl = 0.0;
  for (std::size_t j = 0; j < res.maximizer.size(); ++j) {
    double v = res.maximizer.values[j];
    if (v > 0.0) kl += v * std::log(v / rhobar.values[j]);
  }
  kl /= static_cast<double>(res.maximizer.size());
  res.i_value = -(f_mu + kl);
  return res;
}

namespace {

constexpr int kW1Oversample = 1 << 17;
constexpr int kW1AtomOversample = 1 << 20;

// min_c integral |phi - c| for sampled phi: c = median, then the mean.
double median_deviation(std::vector<double>& phi) {
  std::vector<double> tmp = phi;
  auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
  std::nth_element(tmp.begin(), mid, tmp.end());
  double c = *mid;
  double acc = 0.0;
  for (double v : phi) acc += std::abs(v - c);
  return acc / static_cast<double>(phi.size());
}

// Samples of the zero-mean antiderivative of the field carried by `diff`
// (mode 0 ignored) on an oversampled uniform grid.
std::vector<double> antiderivative_samples(const SpectralCoeffs& diff, int m) {
  SpectralCoeffs fine(1, m);
  int half = diff.n / 2;
  for (int k = -half + 1; k < half; ++k) {
    if (k == 0) continue;
    fine.at(k) = diff.at(k) / cplx{0.0, kTwoPi * k};
  }
  GridField phi = inverse_transform(fine);
  return phi.values;
}

double w1_circle_1d(const SpectralCoeffs& mu_hat, const SpectralCoeffs& nu_hat) {
  SpectralCoeffs diff = mu_hat;
  for (std::size_t j = 0; j < diff.size(); ++j) diff.modes[j] -= nu_hat.modes[j];
  auto phi = antiderivative_samples(diff, kW1Oversample);
  return median_deviation(phi);
}

void check_mass(double a, double b, const char* who) {
  if (std::abs(a - b) > 1e-8)
    throw std::invalid_argument(std::string(who) + ": mass mismatch between the two measures");
}

// Coprime lattice directions for the sliced 2-d distance.
std::vector<std::array<int, 2>> slice_directions(int count) {
  std::vector<std::array<int, 2>> dirs;
  for (int radius = 1; static_cast<int>(dirs.size()) < count && radius <= 16; ++radius)
    for (int p = 0; p <= radius; ++p)
      for (int q = -radius; q <= radius; ++q) {
        if (std::max(p, std::abs(q)) != radius) continue;
        if (p == 0 && q <= 0) continue;
        if (std::gcd(p, std::abs(q)) != 1) continue;
        dirs.push_back({p, q});
      }
  dirs.resize(static_cast<std::size_t>(count));
  return dirs;
}

GridField project_density(const GridField& f, int p, int q) {
  GridField out(1, f.n);
  double cell_mass = 1.0 / static_cast<double>(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    TorusPoint x = f.point(j);
    double t = wrap1(p * x[0] + q * x[1]);
    int b = static_cast<int>(t * f.n) % f.n;
    out.at(b) += f.values[j] * cell_mass * f.n;  // mass to density on the 1-d grid
  }
  return out;
}

}  // namespace

double wasserstein1(const GridField& mu, const GridField& nu) {
  if (mu.dim != nu.dim || mu.n != nu.n)
    throw std::invalid_argument("wasserstein1: shape mismatch");
  check_mass(mu.mean(), nu.mean(), "wasserstein1");
  if (mu.dim == 1) return w1_circle_1d(forward_transform(mu), forward_transform(nu));
  auto dirs = slice_directions(64);
  double acc = 0.0;
  for (auto [p, q] : dirs) {
    double norm = std::sqrt(static_cast<double>(p * p + q * q));
    acc += wasserstein1(project_density(mu, p, q), project_density(nu, p, q)) / norm;
  }
  return acc / static_cast<double>(dirs.size());
}

double wasserstein1(std::span<const TorusPoint> mu, const GridField& nu) {
  check_mass(1.0, nu.mean(), "wasserstein1");
  if (nu.dim == 2) {
    auto dirs = slice_directions(64);
    double acc = 0.0;
    for (auto [p, q] : dirs) {
      std::vector<TorusPoint> proj(mu.size());
      for (std::size_t i = 0; i < mu.size(); ++i)
        proj[i] = {wrap1(p * mu[i][0] + q * mu[i][1]), 0.0};
      double norm = std::sqrt(static_cast<double>(p * p + q * q));
      acc += wasserstein1(proj, project_density(nu, p, q)) / norm;
    }
    return acc / static_cast<double>(dirs.size());
  }
  // Atomic CDF minus the spectral antiderivative of (nu - 1), finely sampled.
  int m = kW1AtomOversample;
  auto smooth = antiderivative_samples(forward_transform(nu), m);
  std::vector<double> xs(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) xs[i] = wrap1(mu[i][0]);
  std::sort(xs.begin(), xs.end());
  std::vector<double> phi(static_cast<std::size_t>(m));
  std::size_t count = 0;
  for (int j = 0; j < m; ++j) {
    double x = static_cast<double>(j) / m;
    while (count < xs.size() && xs[count] <= x) ++count;
    double f_mu = static_cast<double>(count) / static_cast<double>(xs.size());
    double f_nu = x + smooth[static_cast<std::size_t>(j)];
    phi[static_cast<std::size_t>(j)] = f_mu - f_nu;
  }
  return median_deviation(phi);
}

double wasserstein1(std::span<const TorusPoint> mu, std::span<const TorusPoint> nu, int dim) {
  if (dim == 2) {
    auto dirs = slice_directions(64);
    double acc = 0.0;
    for (auto [p, q] : dirs) {
      std::vector<TorusPoint> pm(mu.size()), pn(nu.size());
      for (std::size_t i = 0; i < mu.size(); ++i) pm[i] = {wrap1(p * mu[i][0] + q * mu[i][1]), 0.0};
      for (std::size_t i = 0; i < nu.size(); ++i) pn[i] = {wrap1(p * nu[i][0] + q * nu[i][1]), 0.0};
      double norm = std::sqrt(static_cast<double>(p * p + q * q));
      acc += wasserstein1(pm, pn, 1) / norm;
    }
    return acc / static_cast<double>(dirs.size());
  }
  // Exact event-based circular W1 between atomic measures: the CDF difference
  // is piecewise constant, so the weighted median over segment lengths and the
  // segment integral are both exact.
  struct Event {
    double x;
    double jump;
  };
  std::vector<Event> ev;
  ev.reserve(mu.size() + nu.size());
  for (const auto& p : mu) ev.push_back({wrap1(p[0]), 1.0 / static_cast<double>(mu.size())});
  for (const auto& p : nu) ev.push_back({wrap1(p[0]), -1.0 / static_cast<double>(nu.size())});
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.x < b.x; });

  std::vector<std::pair<double, double>> segs;  // (phi value, length)
  double phi = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    phi += ev[i].jump;
    double next = i + 1 < ev.size() ? ev[i + 1].x : 1.0 + ev[0].x;
    double len = next - ev[i].x;
    if (len > 0.0) segs.emplace_back(phi, len);
  }
  std::sort(segs.begin(), segs.end());
  double half = 0.5, cum = 0.0, c = segs.back().first;
  for (const auto& [v, len] : segs) {
    cum += len;
    if (cum >= half) {
      c = v;
      break;
    }
  }
  double acc = 0.0;
  for (const auto& [v, len] : segs) acc += std::abs(v - c) * len;
  return acc;
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("bootstrap_ci: empty sample set");
  constexpr int kBoot = 200;
  std::vector<double> means(kBoot);
  for (int b = 0; b < kBoot; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto pick = static_cast<std::size_t>(
          rng_u01(seed, static_cast<std::uint64_t>(b), i, 0, 0) * samples.size());
      acc += samples[std::min(pick, samples.size() - 1)];
    }
    means[static_cast<std::size_t>(b)] = acc / static_cast<double>(samples.size());
  }
  std::sort(means.begin(), means.end());
  return {means[4], means[194]};
}

}  // namespace mfl
