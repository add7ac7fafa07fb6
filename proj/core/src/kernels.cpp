#include "meanfield/kernels.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

// Smooth spectral filter applied to gradient tables of families without a
// closed-form derivative; damps the non-decaying tail of the differentiated
// series (exponential filter of order 8).
double grad_filter(double knorm, int n) {
  double t = 2.0 * knorm / n;
  return std::exp(-36.0 * std::pow(t, 8));
}

double riesz_normalization(double s, int d) {
  // Leading-order match with |x|^{-s}: coefficient of |k|^{s-d} so that the
  // continuum transform of c |xi|^{s-d} equals |x|^{-s}.
  return std::tgamma(0.5 * (d - s)) / (std::pow(M_PI, 0.5 * d - s) * std::tgamma(0.5 * s));
}

}  // namespace

std::string family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::PeriodicLog: return "periodic-log";
    case KernelFamily::Riesz: return "riesz";
    case KernelFamily::CosineTest: return "cosine-test";
    case KernelFamily::Pks: return "pks";
    case KernelFamily::Tabulated: return "tabulated";
  }
  return "?";
}

KernelFamily family_from_name(const std::string& s) {
  if (s == "periodic-log") return KernelFamily::PeriodicLog;
  if (s == "riesz") return KernelFamily::Riesz;
  if (s == "cosine-test") return KernelFamily::CosineTest;
  if (s == "pks") return KernelFamily::Pks;
  if (s == "tabulated") return KernelFamily::Tabulated;
  throw std::invalid_argument("unknown kernel family: " + s);
}

bool KernelSpec::has_closed_form() const {
  switch (family) {
    case KernelFamily::PeriodicLog:
    case KernelFamily::CosineTest:
      return true;
    case KernelFamily::Pks:
      return dim == 1;
    default:
      return false;
  }
}

bool KernelSpec::is_singular() const {
  switch (family) {
    case KernelFamily::PeriodicLog:
    case KernelFamily::Riesz:
      return true;
    case KernelFamily::Pks:
      return dim == 2;  // log-type attractive singularity (toward -infinity)
    default:
      return false;
  }
}

double KernelSpec::eval_potential(const std::array<double, 2>& r) const {
  switch (family) {
    case KernelFamily::PeriodicLog: {
      double x = std::abs(r[0]);
      if (x < 1e-300) return grid_table.max();  // on-diagonal guard
      return -std::log(2.0 * std::abs(std::sin(M_PI * x)));
    }
    case KernelFamily::CosineTest:
      return std::cos(kTwoPi * r[0]);
    case KernelFamily::Pks:
      if (dim == 1) {
        double x = wrap1(r[0]);
        return -param * M_PI * (x * x - x + 1.0 / 6.0);
      }
      break;
    default:
      break;
  }
  TorusPoint p{r[0], r[1]};
  return grid_table.interp(p);
}

double KernelSpec::eval_series(const std::array<double, 2>& r) const {
  return mfl::spectral_eval(spectral_table, TorusPoint{r[0], r[1]});
}

ForceSample eval_force(const KernelSpec& spec, const std::array<double, 2>& r) {
  ForceSample out;
  double nr = torus_norm(r, spec.dim);
  std::array<double, 2> q = r;
  if (nr < spec.r_min) {
    out.capped = true;
    if (nr < 1e-300) return out;  // coincident points: no direction, zero force
    double scale = spec.r_min / nr;
    for (int a = 0; a < spec.dim; ++a) q[a] = r[a] * scale;
  }
  switch (spec.family) {
    case KernelFamily::PeriodicLog: {
      // V = -log(2|sin(pi x)|), K = -V' = pi cot(pi x)
      out.f[0] = M_PI / std::tan(M_PI * q[0]);
      return out;
    }
    case KernelFamily::CosineTest: {
      out.f[0] = kTwoPi * std::sin(kTwoPi * q[0]);
      return out;
    }
    case KernelFamily::Pks:
      if (spec.dim == 1) {
        double x = wrap1(q[0]);
        out.f[0] = spec.param * M_PI * (2.0 * x - 1.0);
        return out;
      }
      break;
    default:
      break;
  }
  TorusPoint p{q[0], q[1]};
  for (int a = 0; a < spec.dim; ++a)
    out.f[static_cast<std::size_t>(a)] = -spec.grad_table[static_cast<std::size_t>(a)].interp(p);
  return out;
}

KernelSpec build_kernel(KernelFamily family, const BuildParams& params, int n, int dim) {
  if (!is_pow2(n)) throw std::invalid_argument("build_kernel: n must be a power of two");
  if (dim < 1 || dim > 2) throw std::invalid_argument("build_kernel: dim must be 1 or 2");

  KernelSpec spec;
  spec.family = family;
  spec.dim = dim;
  spec.n = n;
  spec.r_min = 0.5 / n;
  spec.spectral_table = SpectralCoeffs(dim, n);
  auto& c = spec.spectral_table;

  switch (family) {
    case KernelFamily::PeriodicLog: {
      if (dim != 1) throw std::invalid_argument("periodic-log kernel is 1-d");
      for (std::size_t j = 1; j < c.size(); ++j) {
        int k = SpectralCoeffs::mode_of(static_cast<int>(j), n);
        c.modes[j] = cplx{1.0 / (2.0 * std::abs(k)), 0.0};
      }
      spec.meta = {1.0, 2.0, 2.0, 0.5, KernelSign::Repulsive, SigmaMode::Fixed};
      break;
    }
    case KernelFamily::Riesz: {
      double s = params.s;
      if (!(s > 0.0 && s < dim)) throw std::invalid_argument("riesz: need 0 < s < d");
      spec.param = s;
      double cs = riesz_normalization(s, dim);
      for (std::size_t j = 0; j < c.size(); ++j) {
        double k2 = c.mode_norm2(j);
        if (k2 == 0.0) continue;
        c.modes[j] = cplx{cs * std::pow(k2, 0.5 * (s - dim)), 0.0};
      }
      spec.meta = {s + 1.0, s + 2.0, std::min(2.0, 0.5 * (1.0 + dim / s)),
                   0.5 * dim, KernelSign::Repulsive, SigmaMode::Fixed};
      break;
    }
    case KernelFamily::CosineTest: {
      if (dim == 1) {
        c.at(1) = c.at(-1) = cplx{0.5, 0.0};
      } else {
        c.at(1, 0) = c.at(-1, 0) = cplx{0.5, 0.0};
      }
      spec.meta = {1.0, 2.0, 2.0, 0.5 * dim, KernelSign::Repulsive, SigmaMode::Fixed};
      break;
    }
    case KernelFamily::Pks: {
      double lambda = params.lambda;
      if (!(lambda > 0.0)) throw std::invalid_argument("pks: need lambda > 0");
      spec.param = lambda;
      for (std::size_t j = 0; j < c.size(); ++j) {
        double k2 = c.mode_norm2(j);
        if (k2 == 0.0) continue;
        // Green-function normalization: Delta V = 2 pi lambda delta
        c.modes[j] = cplx{-lambda / (kTwoPi * k2), 0.0};
      }
      spec.meta = {1.0, 2.0, 2.0, 0.5 * dim, KernelSign::Attractive, SigmaMode::Fixed};
      break;
    }
    case KernelFamily::Tabulated:
      throw std::invalid_argument("tabulated kernels are created via import_kernel_csv");
  }

  spec.grid_table = inverse_transform(spec.spectral_table);

  if (!spec.has_closed_form()) {
    auto gc = spectral_gradient_coeffs(spec.spectral_table);
    for (auto& g : gc) {
      for (std::size_t j = 0; j < g.size(); ++j)
        g.modes[j] *= grad_filter(std::sqrt(g.mode_norm2(j)), n);
      spec.grad_table.push_back(inverse_transform(g));
    }
  }
  return spec;
}

KernelSpec resample_kernel(const KernelSpec& spec, int n) {
  if (!is_pow2(n)) throw std::invalid_argument("resample_kernel: n must be a power of two");
  if (n == spec.n) return spec;
  KernelSpec out;
  out.family = spec.family;
  out.dim = spec.dim;
  out.n = n;
  out.param = spec.param;
  out.meta = spec.meta;
  out.r_min = spec.r_min;
  out.spectral_table = SpectralCoeffs(spec.dim, n);
  int half = std::min(n, spec.n) / 2;
  if (spec.dim == 1) {
    for (int k = -half + 1; k < half; ++k) out.spectral_table.at(k) = spec.spectral_table.at(k);
  } else {
    for (int k1 = -half + 1; k1 < half; ++k1)
      for (int k2 = -half + 1; k2 < half; ++k2)
        out.spectral_table.at(k1, k2) = spec.spectral_table.at(k1, k2);
  }
  out.grid_table = inverse_transform(out.spectral_table);
  if (!out.has_closed_form()) {
    bool filtered = spec.r_min > 0.0;  // smooth regularized kernels carry r_min = 0
    auto gc = spectral_gradient_coeffs(out.spectral_table);
    for (auto& g : gc) {
      if (filtered)
        for (std::size_t j = 0; j < g.size(); ++j)
          g.modes[j] *= grad_filter(std::sqrt(g.mode_norm2(j)), n);
      out.grad_table.push_back(inverse_transform(g));
    }
  }
  return out;
}

bool HypothesisReport::passed(const std::string& key) const {
  auto it = entries.find(key);
  return it != entries.end() && it->second.status == HypStatus::Pass;
}

namespace {

// |grad V| and a Hessian magnitude at a grid point, analytic when possible.
struct PointDerivs {
  double grad = 0.0;
  double hess = 0.0;
};

PointDerivs derivs_at(const KernelSpec& spec, const TorusPoint& p) {
  PointDerivs d;
  switch (spec.family) {
    case KernelFamily::PeriodicLog: {
      double x = torus_displacement1(p[0], 0.0);
      double sp = std::sin(M_PI * std::abs(x));
      d.grad = M_PI * std::abs(std::cos(M_PI * x)) / sp;
      d.hess = M_PI * M_PI / (sp * sp);
      return d;
    }
    case KernelFamily::CosineTest: {
      d.grad = kTwoPi * std::abs(std::sin(kTwoPi * p[0]));
      d.hess = kTwoPi * kTwoPi * std::abs(std::cos(kTwoPi * p[0]));
      return d;
    }
    case KernelFamily::Pks:
      if (spec.dim == 1) {
        double x = wrap1(p[0]);
        d.grad = spec.param * M_PI * std::abs(2.0 * x - 1.0);
        d.hess = 2.0 * spec.param * M_PI;
        return d;
      }
      break;
    default:
      break;
  }
  // Centered finite differences of the band-limited table.
  const auto& g = spec.grid_table;
  double h = g.h();
  double g2 = 0.0, hmax = 0.0;
  for (int a = 0; a < spec.dim; ++a) {
    TorusPoint pp = p, pm = p;
    pp[static_cast<std::size_t>(a)] += h;
    pm[static_cast<std::size_t>(a)] -= h;
    double vp = g.interp(wrap(pp, spec.dim));
    double vm = g.interp(wrap(pm, spec.dim));
    double v0 = g.interp(wrap(p, spec.dim));
    double da = (vp - vm) / (2.0 * h);
    g2 += da * da;
    hmax = std::max(hmax, std::abs((vp - 2.0 * v0 + vm) / (h * h)));
  }
  d.grad = std::sqrt(g2);
  d.hess = hmax;
  return d;
}

double discrete_lp_norm(const KernelSpec& spec, double p) {
  double h = spec.h();
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t j = 0; j < spec.grid_table.size(); ++j) {
    TorusPoint x = spec.grid_table.point(j);
    auto r = torus_displacement(x, TorusPoint{0.0, 0.0}, spec.dim);
    if (torus_norm(r, spec.dim) < 2.0 * h) continue;
    acc += std::pow(std::abs(spec.grid_table.values[j]), p);
    ++cnt;
  }
  (void)cnt;
  double cell = std::pow(h, spec.dim);
  return std::pow(acc * cell, 1.0 / p);
}

}  // namespace

HypothesisReport check_hypotheses(const KernelSpec& spec) {
  if (spec.n < 64) throw std::invalid_argument("check_hypotheses: need n >= 64");
  HypothesisReport rep;
  const double h = spec.h();
  const auto& g = spec.grid_table;

  // Collect off-diagonal grid points (|x| >= 2h) with their radii.
  std::vector<std::size_t> offdiag;
  std::vector<double> radius(g.size(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto r = torus_displacement(g.point(j), TorusPoint{0.0, 0.0}, spec.dim);
    radius[j] = torus_norm(r, spec.dim);
    if (radius[j] >= 2.0 * h) offdiag.push_back(j);
  }

  // hyp01: L^p finiteness trend under refinement.
  {
    HypEntry e;
    e.resolution = spec.n;
    double norm_f = discrete_lp_norm(spec, spec.meta.p);
    e.constant = norm_f;
    if (spec.family != KernelFamily::Tabulated) {
      BuildParams bp;
      bp.s = spec.param;
      bp.lambda = spec.param > 0 ? spec.param : 1.0;
      KernelSpec coarse = build_kernel(spec.family, bp, spec.n / 2, spec.dim);
      double norm_c = discrete_lp_norm(coarse, spec.meta.p);
      e.status = (norm_f <= 2.0 * norm_c + 1e-8) ? HypStatus::Pass : HypStatus::Fail;
      e.note = "norm(n)/norm(n/2) = " + std::to_string(norm_f / std::max(norm_c, 1e-300));
    } else {
      e.status = HypStatus::Pass;
      e.note = "single resolution only";
    }
    rep.entries["hyp01"] = e;
  }

  // hyp03: Fourier sign.
  {
    HypEntry e;
    e.resolution = spec.n;
    double vmin = 1e300;
    std::size_t jmin = 0;
    for (std::size_t j = 0; j < spec.spectral_table.size(); ++j) {
      double re = spec.spectral_table.modes[j].real();
      if (re < vmin) { vmin = re; jmin = j; }
    }
    e.constant = vmin;
    e.worst_location = std::sqrt(spec.spectral_table.mode_norm2(jmin));
    e.status = (vmin >= -1e-10) ? HypStatus::Pass : HypStatus::Fail;
    if (spec.meta.sign == KernelSign::Attractive) e.note = "sign=attractive";
    rep.entries["hyp03"] = e;
  }

  // hyp001 and hyp02: pointwise controls over off-diagonal grid points.
  {
    HypEntry e1, e2;
    e1.resolution = e2.resolution = spec.n;
    double c_grad = 0.0, c_hess = 0.0, c_ratio = 0.0;
    double loc1 = 0.0, loc2 = 0.0;
    for (std::size_t j : offdiag) {
      auto d = derivs_at(spec, g.point(j));
      double cg = d.grad * std::pow(radius[j], spec.meta.k);
      double ch = d.hess * std::pow(radius[j], spec.meta.kprime);
      if (cg > c_grad) { c_grad = cg; loc1 = radius[j]; }
      c_hess = std::max(c_hess, ch);
      double v = g.values[j];
      if (v > 1e-10) {
        double cr = d.grad * radius[j] / v;
        if (cr > c_ratio) { c_ratio = cr; loc2 = radius[j]; }
      }
    }
    e1.constant = std::max(c_grad, c_hess);
    e1.worst_location = loc1;
    e1.status = HypStatus::Pass;
    e1.note = "C_grad=" + std::to_string(c_grad) + " C_hess=" + std::to_string(c_hess);
    rep.entries["hyp001"] = e1;
    e2.constant = c_ratio;
    e2.worst_location = loc2;
    e2.status = HypStatus::Pass;
    rep.entries["hyp02"] = e2;
  }

  // hyp04: doubling near the singularity (V(x) <= C V(y) for |y| <= 2|x|).
  {
    HypEntry e;
    e.resolution = spec.n;
    if (!spec.is_singular() || spec.meta.sign == KernelSign::Attractive) {
      e.status = HypStatus::NotApplicable;
      e.note = "V bounded or attractive: lim V(x) != +inf";
    } else {
      double cmax = 0.0, loc = 0.0;
      int stride = spec.dim == 1 ? 1 : 4;
      for (std::size_t a = 0; a < offdiag.size(); a += static_cast<std::size_t>(stride)) {
        std::size_t ja = offdiag[a];
        if (radius[ja] > 0.25) continue;
        double vx = g.values[ja];
        if (vx <= 0.0) continue;
        for (std::size_t b = 0; b < offdiag.size(); b += static_cast<std::size_t>(stride)) {
          std::size_t jb = offdiag[b];
          if (radius[jb] > 2.0 * radius[ja] || radius[jb] > 0.5) continue;
          double vy = g.values[jb];
          if (vy <= 1e-10) continue;
          double ratio = vx / vy;
          if (ratio > cmax) { cmax = ratio; loc = radius[ja]; }
        }
      }
      e.constant = cmax;
      e.worst_location = loc;
      e.status = HypStatus::Pass;
    }
    rep.entries["hyp04"] = e;
  }

  // hyp05: local Fourier quotient on adjacent mode pairs.
  {
    HypEntry e;
    e.resolution = spec.n;
    double f_sigma = spec.meta.sigma_mode == SigmaMode::Vanishing ? 0.0 : 1.0;
    double cmax = 0.0, loc = 0.0;
    const auto& c = spec.spectral_table;
    for (std::size_t j = 0; j < c.size(); ++j) {
      auto k = c.mode_vec(j);
      if (std::abs(k[0]) >= spec.n / 2 - 1 || (spec.dim == 2 && std::abs(k[1]) >= spec.n / 2 - 1))
        continue;
      double knorm = std::sqrt(c.mode_norm2(j));
      for (int a = 0; a < spec.dim; ++a) {
        std::array<int, 2> kk = k;
        kk[static_cast<std::size_t>(a)] += 1;
        cplx vz = spec.dim == 1 ? c.at(kk[0]) : c.at(kk[0], kk[1]);
        double denom = c.modes[j].real() +
                       f_sigma / (1.0 + std::pow(knorm, spec.dim - spec.meta.alpha));
        if (denom <= 1e-14) continue;
        double quotient = std::abs(vz.real() - c.modes[j].real()) * (1.0 + knorm) / denom;
        if (quotient > cmax) { cmax = quotient; loc = knorm; }
      }
    }
    e.constant = cmax;
    e.worst_location = loc;
    e.status = HypStatus::Pass;
    e.note = f_sigma == 0.0 ? "f(sigma)=0" : "f(sigma)=1";
    rep.entries["hyp05"] = e;
  }

  // hyp06: declaration of the viscosity regime.
  {
    HypEntry e;
    e.resolution = spec.n;
    e.constant = spec.meta.sigma_mode == SigmaMode::Vanishing ? 0.0 : 1.0;
    e.status = HypStatus::Pass;
    e.note = spec.meta.sigma_mode == SigmaMode::Vanishing ? "vanishing" : "fixed";
    rep.entries["hyp06"] = e;
  }

  return rep;
}

void export_kernel_csv(const KernelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_kernel_csv: cannot open " + path);
  out.precision(17);
  out << "family," << family_name(spec.family) << "\n";
  out << "dim," << spec.dim << "\n";
  out << "n," << spec.n << "\n";
  out << "param," << spec.param << "\n";
  out << "k," << spec.meta.k << "\n";
  out << "kprime," << spec.meta.kprime << "\n";
  out << "p," << spec.meta.p << "\n";
  out << "alpha," << spec.meta.alpha << "\n";
  out << "sign," << (spec.meta.sign == KernelSign::Repulsive ? "repulsive" : "attractive") << "\n";
  out << "sigma_mode," << (spec.meta.sigma_mode == SigmaMode::Vanishing ? "vanishing" : "fixed")
      << "\n";
  out << "values\n";
  for (double v : spec.grid_table.values) out << v << "\n";
  out << "coeffs\n";
  for (const auto& m : spec.spectral_table.modes) out << m.real() << "," << m.imag() << "\n";
}

KernelSpec import_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_kernel_csv: cannot open " + path);
  KernelSpec spec;
  spec.family = KernelFamily::Tabulated;
  std::string line;
  std::map<std::string, std::string> header;
  while (std::getline(in, line)) {
    if (line == "values") break;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("kernel csv: bad header line " + line);
    header[line.substr(0, comma)] = line.substr(comma + 1);
  }
  spec.dim = std::stoi(header.at("dim"));
  spec.n = std::stoi(header.at("n"));
  spec.param = std::stod(header.at("param"));
  spec.meta.k = std::stod(header.at("k"));
  spec.meta.kprime = std::stod(header.at("kprime"));
  spec.meta.p = std::stod(header.at("p"));
  spec.meta.alpha = std::stod(header.at("alpha"));
  spec.meta.sign = header.at("sign") == "attractive" ? KernelSign::Attractive : KernelSign::Repulsive;
  spec.meta.sigma_mode =
      header.at("sigma_mode") == "vanishing" ? SigmaMode::Vanishing : SigmaMode::Fixed;
  spec.r_min = 0.5 / spec.n;

  spec.grid_table = GridField(spec.dim, spec.n);
  for (auto& v : spec.grid_table.values) {
    if (!std::getline(in, line)) throw std::runtime_error("kernel csv: truncated values");
    v = std::stod(line);
  }
  if (!std::getline(in, line) || line != "coeffs")
    throw std::runtime_error("kernel csv: missing coeffs section");
  spec.spectral_table = SpectralCoeffs(spec.dim, spec.n);
  for (auto& m : spec.spectral_table.modes) {
    if (!std::getline(in, line)) throw std::runtime_error("kernel csv: truncated coeffs");
    auto comma = line.find(',');
    m = cplx{std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))};
  }

  auto gc = spectral_gradient_coeffs(spec.spectral_table);
  for (auto& gcoef : gc) {
    for (std::size_t j = 0; j < gcoef.size(); ++j)
      gcoef.modes[j] *= grad_filter(std::sqrt(gcoef.mode_norm2(j)), spec.n);
    spec.grad_table.push_back(inverse_transform(gcoef));
  }
  return spec;
}

}  // namespace mfl
