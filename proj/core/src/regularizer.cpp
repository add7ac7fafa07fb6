#include "meanfield/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

// C^infinity bump, support |x| < 1/2, evaluated radially.
double bump(double r) {
  double t = 2.0 * r;
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - t * t));
}

// Continuous Fourier transform of the bump at radial frequency xi, by
// trapezoid quadrature (superalgebraic here: the integrand is C^infinity and
// compactly supported).
double bump_transform(double xi, int dim) {
  constexpr int kQuad = 1024;
  double acc = 0.0;
  double dr = 0.5 / kQuad;
  if (dim == 1) {
    // 2 int_0^{1/2} phi(r) cos(2 pi xi r) dr
    for (int i = 0; i < kQuad; ++i) {
      double r = (i + 0.5) * dr;
      acc += bump(r) * std::cos(kTwoPi * xi * r);
    }
    return 2.0 * acc * dr;
  }
  // 2 pi int_0^{1/2} phi(r) J0(2 pi xi r) r dr
  for (int i = 0; i < kQuad; ++i) {
    double r = (i + 0.5) * dr;
    acc += bump(r) * std::cyl_bessel_j(0.0, kTwoPi * xi * r) * r;
  }
  return kTwoPi * acc * dr;
}

}  // namespace

double MollifierSpec::khat(double xi) const {
  xi = std::abs(xi);
  double pos = xi / dxi;
  auto idx = static_cast<std::size_t>(pos);
  if (idx + 2 >= phihat.size()) return 0.0;
  // Catmull-Rom through the sampled ratio, then square (keeps khat >= 0).
  double t = pos - static_cast<double>(idx);
  double pm1 = idx == 0 ? phihat[1] : phihat[idx - 1];  // even extension at 0
  double p0 = phihat[idx], p1 = phihat[idx + 1], p2 = phihat[idx + 2];
  double r = p0 + 0.5 * t * (p1 - pm1 + t * (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2 +
                                             t * (3.0 * (p0 - p1) + p2 - pm1)));
  return r * r;
}

MollifierSpec make_mollifier(int dim, int profile_n) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("make_mollifier: dim must be 1 or 2");
  if (!is_pow2(profile_n)) throw std::invalid_argument("make_mollifier: profile_n must be 2^m");
  MollifierSpec m;
  m.dim = dim;
  m.dxi = 1.0 / 64.0;
  // The transform ratio decays superalgebraically; past xi = 64 it is
  // negligible and khat() returns 0.
  auto count = static_cast<std::size_t>(64.0 / m.dxi) + 3;
  m.phihat.resize(count);
  double ref = bump_transform(0.0, dim);
  for (std::size_t i = 0; i < count; ++i)
    m.phihat[i] = bump_transform(static_cast<double>(i) * m.dxi, dim) / ref;

  // Profile at scale 1/2 (support radius 1/2 fits the torus without overlap,
  // so the periodization coefficients are the continuous transform samples).
  SpectralCoeffs pc(dim, profile_n);
  for (std::size_t j = 0; j < pc.size(); ++j)
    pc.modes[j] = cplx{m.khat(0.5 * std::sqrt(pc.mode_norm2(j))), 0.0};
  m.profile = inverse_transform(pc);
  return m;
}

namespace {

// Hurwitz zeta for 0 < a < 1, q in (0, 2), by Euler-Maclaurin.
double hurwitz_zeta(double a, double q) {
  constexpr int J = 24;
  double acc = 0.0;
  for (int j = 0; j < J; ++j) acc += std::pow(q + j, -a);
  double qj = q + J;
  acc += std::pow(qj, 1.0 - a) / (a - 1.0) + 0.5 * std::pow(qj, -a);
  // B_2, B_4, ..., B_12 tail corrections
  static const double b2i[] = {1.0 / 6.0,  -1.0 / 30.0, 1.0 / 42.0,
                               -1.0 / 30.0, 5.0 / 66.0,  -691.0 / 2730.0};
  double rising = a;              // (a)_{2i-1}
  double fact = 2.0;              // (2i)!
  double power = std::pow(qj, -a - 1.0);
  for (int i = 1; i <= 6; ++i) {
    acc += b2i[i - 1] / fact * rising * power;
    rising *= (a + 2.0 * i - 1.0) * (a + 2.0 * i);
    fact *= (2.0 * i + 1.0) * (2.0 * i + 2.0);
    power /= qj * qj;
  }
  return acc;
}

// Full-series periodized potential for the ideal d=1 kernels; falls back to
// the band-limited table for families without a usable series formula.
// For riesz(s): V(x) = 2 c_s sum_k k^{s-1} cos(2 pi k x), summed in closed
// form through the Hurwitz representation of the cosine zeta series.
bool ideal_potential_1d(const KernelSpec& spec, double x, double* out) {
  if (spec.dim != 1) return false;
  x = std::abs(wrap1(x));
  if (spec.family == KernelFamily::PeriodicLog) {
    *out = -std::log(2.0 * std::abs(std::sin(M_PI * x)));
    return true;
  }
  if (spec.family == KernelFamily::Riesz) {
    double s = spec.param;
    double sigma = 1.0 - s;  // cosine series exponent sum k^{-sigma} cos
    double cs = std::tgamma(0.5 * (1.0 - s)) /
                (std::pow(M_PI, 0.5 - s) * std::tgamma(0.5 * s));
    double pref = std::pow(2.0 * M_PI, sigma) /
                  (4.0 * std::tgamma(sigma) * std::cos(0.5 * M_PI * sigma));
    double series = pref * (hurwitz_zeta(s, x) + hurwitz_zeta(s, 1.0 - x));
    *out = 2.0 * cs * series;
    return true;
  }
  return false;
}

// Integral of the ideal potential over [lo, hi] (0 < lo < hi) by composite
// Gauss-Legendre; panels are graded dyadically toward 0 by the caller.
double panel_integral(const KernelSpec& spec, double lo, double hi) {
  static const double gx[8] = {0.0950125098376374, 0.2816035507792589,
                               0.4580167776572274, 0.6178762444026438,
                               0.7554044083550030, 0.8656312023878318,
                               0.9445750230732326, 0.9894009349916499};
  static const double gw[8] = {0.1894506104550685, 0.1826034150449236,
                               0.1691565193950025, 0.1495959888165767,
                               0.1246289712555339, 0.0951585116824928,
                               0.0622535239386479, 0.0271524594117541};
  double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (int i = 0; i < 8; ++i) {
    double va = 0.0, vb = 0.0;
    ideal_potential_1d(spec, mid - half * gx[i], &va);
    ideal_potential_1d(spec, mid + half * gx[i], &vb);
    acc += gw[i] * (va + vb);
  }
  return acc * half;
}

}  // namespace

double ball_mass(const KernelSpec& spec, double delta) {
  if (!(delta > 0.0 && delta <= 0.5))
    throw std::invalid_argument("ball_mass: need 0 < delta <= 1/2");
  double probe;
  if (ideal_potential_1d(spec, 0.25, &probe)) {
    // Refined quadrature of the true kernel: dyadic panels graded toward the
    // singularity; the remainder below delta 2^-52 is zero to double precision
    // for an integrable singularity.
    double acc = 0.0, hi = delta;
    for (int j = 0; j < 52; ++j) {
      double lo = 0.5 * hi;
      acc += panel_integral(spec, lo, hi);
      hi = lo;
    }
    return 2.0 * acc;
  }
  const auto& c = spec.spectral_table;
  double acc = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    double knorm = std::sqrt(c.mode_norm2(j));
    double ind;  // Fourier transform of the ball indicator at this mode
    if (knorm == 0.0) {
      ind = spec.dim == 1 ? 2.0 * delta : M_PI * delta * delta;
    } else if (spec.dim == 1) {
      ind = std::sin(kTwoPi * knorm * delta) / (M_PI * knorm);
    } else {
      ind = delta * std::cyl_bessel_j(1.0, kTwoPi * knorm * delta) / knorm;
    }
    acc += c.modes[j].real() * ind;  // V is real and even, so no imaginary part
  }
  return acc;
}

namespace {

// Mollified grid table K_delta * V via the continuous transform of K_delta.
GridField mollified_table(const KernelSpec& base, const MollifierSpec& moll, double delta) {
  SpectralCoeffs w = base.spectral_table;
  for (std::size_t j = 0; j < w.size(); ++j)
    w.modes[j] *= moll.khat(delta * std::sqrt(w.mode_norm2(j)));
  return inverse_transform(w);
}

}  // namespace

double compare_scale(const KernelSpec& base, const MollifierSpec& moll, double delta) {
  GridField w = mollified_table(base, moll, delta);
  const auto& g = base.grid_table;
  double h = base.h();
  std::vector<std::pair<double, double>> pts;  // (radius, W - V)
  pts.reserve(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto r = torus_displacement(g.point(j), TorusPoint{0.0, 0.0}, base.dim);
    double nr = torus_norm(r, base.dim);
    if (nr < 2.0 * h) continue;
    pts.emplace_back(nr, w.values[j] - g.values[j]);
  }
  std::sort(pts.begin(), pts.end());
  double r_ok = 0.0;
  for (const auto& [nr, excess] : pts) {
    if (excess > 1e-12) break;
    r_ok = nr;
  }
  return r_ok;
}

std::vector<double> select_delta_sequence(const KernelSpec& base, const MollifierSpec& moll,
                                          double C, double eps, int M, bool* truncated) {
  if (!base.is_singular() || base.meta.sign != KernelSign::Repulsive)
    throw std::invalid_argument("select_delta_sequence: kernel must be singular repulsive");
  if (!(eps > 0.0 && eps <= 0.25))
    throw std::invalid_argument("select_delta_sequence: need 0 < eps <= 1/4");

  double h = base.h();
  // Geometric candidate ladder from 1/4 down to the grid floor 2h.
  std::vector<double> candidates;
  for (double d = 0.25; d >= 2.0 * h; d *= std::pow(2.0, -0.125)) candidates.push_back(d);

  auto admissible = [&](double d) {
    double mb = ball_mass(base, d);
    double ann = mb - ball_mass(base, 0.5 * d);
    return ann > 0.0 && mb <= C * ann;
  };
  auto next_scale = [&](double cap) -> double {
    for (double d : candidates)
      if (d <= cap && admissible(d)) return d;
    return 0.0;
  };

  std::vector<double> deltas;
  double cap = eps * eps / C;
  while (static_cast<int>(deltas.size()) < M) {
    double d = next_scale(cap);
    if (d <= 0.0) break;
    deltas.push_back(d);
    double f = compare_scale(base, moll, d);
    cap = std::min({f, std::pow(d, 2.0 * base.meta.k), d * (1.0 - 1e-12)});
  }
  if (truncated) *truncated = static_cast<int>(deltas.size()) < M;
  return deltas;
}

RegularizedKernel build_regularized(const KernelSpec& base, double eps, double C) {
  RegularizedKernel out;
  out.epsilon = eps;
  out.C = C;
  out.base = base;
  out.M_requested = static_cast<int>(std::ceil(1.0 / eps));

  MollifierSpec moll = make_mollifier(base.dim);
  out.deltas = select_delta_sequence(base, moll, C, eps, out.M_requested, &out.truncated);
  if (out.deltas.empty())
    throw std::runtime_error(
        "build_regularized: no resolvable mollification scale; refine the grid");

  // What_eps(k) = Vhat(k) * (1/M) sum_i khat(delta_i |k|); Vhat_eps = What / (1 + 2 C eps).
  auto m_actual = static_cast<double>(out.deltas.size());
  double rescale = 1.0 / (1.0 + 2.0 * C * eps);
  KernelSpec smooth;
  smooth.family = KernelFamily::Tabulated;
  smooth.dim = base.dim;
  smooth.n = base.n;
  smooth.param = eps;
  smooth.meta = base.meta;
  smooth.r_min = 0.0;  // smooth everywhere, no singularity guard
  smooth.spectral_table = base.spectral_table;
  for (std::size_t j = 0; j < smooth.spectral_table.size(); ++j) {
    double knorm = std::sqrt(smooth.spectral_table.mode_norm2(j));
    double damp = 0.0;
    for (double d : out.deltas) damp += moll.khat(d * knorm);
    smooth.spectral_table.modes[j] *= rescale * damp / m_actual;
  }
  smooth.grid_table = inverse_transform(smooth.spectral_table);
  // The regularized kernel is smooth, so its differentiated series converges
  // and the gradient tables need no filtering.
  for (auto& gc : spectral_gradient_coeffs(smooth.spectral_table))
    smooth.grad_table.push_back(inverse_transform(gc));
  out.smooth = std::move(smooth);

  // Property report.
  auto& rep = out.report;
  rep.min_mode = 1e300;
  for (const auto& mode : out.smooth.spectral_table.modes)
    rep.min_mode = std::min(rep.min_mode, mode.real());

  const auto& gv = base.grid_table;
  const auto& ge = out.smooth.grid_table;
  double h = base.h();
  double cell = std::pow(h, base.dim);
  // The pointwise domination V_eps <= V + eps is gauge-fixed by working with
  // the nonnegative-shifted kernel V - min V; for the stored zero-mean tables
  // the uniform rescale contributes exactly shift = (-min V) 2 C eps/(1+2 C eps)
  // to V_eps - V, which the shifted comparison removes.
  double shift = std::max(0.0, -gv.min()) * 2.0 * C * eps / (1.0 + 2.0 * C * eps);
  rep.max_excess = -1e300;
  for (double d : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
    rep.l1_tail[d] = 0.0;
    rep.l1_tail_grad[d] = 0.0;
  }
  for (std::size_t j = 0; j < gv.size(); ++j) {
    auto r = torus_displacement(gv.point(j), TorusPoint{0.0, 0.0}, base.dim);
    double nr = torus_norm(r, base.dim);
    double diff = gv.values[j] - ge.values[j];
    rep.l1_distance += std::abs(diff) * cell;
    if (nr >= 2.0 * h) rep.max_excess = std::max(rep.max_excess, -diff - shift);
    if (nr < 1.0 / 32.0) continue;
    auto fb = eval_force(base, r);
    auto fe = eval_force(out.smooth, r);
    double gd = 0.0;
    for (int a = 0; a < base.dim; ++a) {
      double da = fb.f[static_cast<std::size_t>(a)] - fe.f[static_cast<std::size_t>(a)];
      gd += da * da;
    }
    gd = std::sqrt(gd);
    for (auto& [d, acc] : rep.l1_tail)
      if (nr >= d) acc += std::abs(diff) * cell;
    for (auto& [d, acc] : rep.l1_tail_grad)
      if (nr >= d) acc += gd * cell;
  }
  return out;
}

}  // namespace mfl
