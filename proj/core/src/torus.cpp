#include "meanfield/torus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace mfl {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

// FFTW planner is not thread safe; executing a plan on its own arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

double wrap1(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;  // guards against floor rounding at negative epsilons
  return r;
}

TorusPoint wrap(std::span<const double> raw) {
  if (raw.empty() || raw.size() > 2) throw std::invalid_argument("wrap: dim must be 1 or 2");
  TorusPoint p{0.0, 0.0};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) throw std::invalid_argument("wrap: non-finite coordinate");
    p[i] = wrap1(raw[i]);
  }
  return p;
}

TorusPoint wrap(const TorusPoint& p, int dim) {
  return wrap(std::span<const double>(p.data(), static_cast<std::size_t>(dim)));
}

double torus_displacement1(double a, double b) {
  double x = a - b;
  double r = x - std::floor(x + 0.5);  // [-1/2, 1/2), tie at +1/2 maps to -1/2
  if (r >= 0.5) r = -0.5;
  return r;
}

std::array<double, 2> torus_displacement(const TorusPoint& a, const TorusPoint& b, int dim) {
  std::array<double, 2> r{0.0, 0.0};
  for (int i = 0; i < dim; ++i) r[i] = torus_displacement1(a[i], b[i]);
  return r;
}

double torus_norm(const std::array<double, 2>& r, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += r[i] * r[i];
  return std::sqrt(s);
}

GridField::GridField(int dim_, int n_, double fill) : dim(dim_), n(n_) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("GridField: dim must be 1 or 2");
  if (n <= 0 || n % 2 != 0) throw std::invalid_argument("GridField: n must be even positive");
  std::size_t sz = static_cast<std::size_t>(n);
  if (dim == 2) sz *= n;
  values.assign(sz, fill);
}

TorusPoint GridField::point(std::size_t flat) const {
  if (dim == 1) return {static_cast<double>(flat) / n, 0.0};
  return {static_cast<double>(flat / n) / n, static_cast<double>(flat % n) / n};
}

double GridField::mean() const {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double GridField::min() const { return *std::min_element(values.begin(), values.end()); }
double GridField::max() const { return *std::max_element(values.begin(), values.end()); }

double GridField::interp(const TorusPoint& p) const {
  double x = wrap1(p[0]) * n;
  int i0 = static_cast<int>(x);
  double fx = x - i0;
  i0 %= n;
  int i1 = (i0 + 1) % n;
  if (dim == 1) return (1.0 - fx) * at(i0) + fx * at(i1);
  double y = wrap1(p[1]) * n;
  int j0 = static_cast<int>(y);
  double fy = y - j0;
  j0 %= n;
  int j1 = (j0 + 1) % n;
  return (1.0 - fx) * ((1.0 - fy) * at(i0, j0) + fy * at(i0, j1)) +
         fx * ((1.0 - fy) * at(i1, j0) + fy * at(i1, j1));
}

SpectralCoeffs::SpectralCoeffs(int dim_, int n_) : dim(dim_), n(n_) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("SpectralCoeffs: dim must be 1 or 2");
  if (n <= 0 || n % 2 != 0) throw std::invalid_argument("SpectralCoeffs: n must be even positive");
  std::size_t sz = static_cast<std::size_t>(n);
  if (dim == 2) sz *= n;
  modes.assign(sz, cplx{0.0, 0.0});
}

cplx& SpectralCoeffs::at(int k) { return modes[static_cast<std::size_t>(index_of(k, n))]; }
cplx SpectralCoeffs::at(int k) const { return modes[static_cast<std::size_t>(index_of(k, n))]; }
cplx& SpectralCoeffs::at(int k1, int k2) {
  return modes[static_cast<std::size_t>(index_of(k1, n)) * n + index_of(k2, n)];
}
cplx SpectralCoeffs::at(int k1, int k2) const {
  return modes[static_cast<std::size_t>(index_of(k1, n)) * n + index_of(k2, n)];
}

std::array<int, 2> SpectralCoeffs::mode_vec(std::size_t j) const {
  if (dim == 1) return {mode_of(static_cast<int>(j), n), 0};
  return {mode_of(static_cast<int>(j) / n, n), mode_of(static_cast<int>(j) % n, n)};
}

double SpectralCoeffs::mode_norm2(std::size_t j) const {
  auto k = mode_vec(j);
  return static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
}

namespace {

void run_fft(int dim, int n, std::vector<cplx>& data, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (dim == 1)
      plan = fftw_plan_dft_1d(n, ptr, ptr, sign, FFTW_ESTIMATE);
    else
      plan = fftw_plan_dft_2d(n, n, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
}

}  // namespace

SpectralCoeffs forward_transform(const GridField& f) {
  if (f.n <= 0 || f.n % 2 != 0) throw std::invalid_argument("forward_transform: n must be even");
  for (double v : f.values)
    if (!std::isfinite(v)) throw std::invalid_argument("forward_transform: non-finite field value");
  SpectralCoeffs c(f.dim, f.n);
  for (std::size_t i = 0; i < f.size(); ++i) c.modes[i] = cplx{f.values[i], 0.0};
  run_fft(f.dim, f.n, c.modes, FFTW_FORWARD);
  double scale = 1.0 / static_cast<double>(f.size());
  for (auto& m : c.modes) m *= scale;
  return c;
}

GridField inverse_transform(const SpectralCoeffs& c) {
  std::vector<cplx> data = c.modes;
  run_fft(c.dim, c.n, data, FFTW_BACKWARD);
  GridField f(c.dim, c.n);
  for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = data[i].real();
  return f;
}

SpectralCoeffs empirical_fourier(std::span<const TorusPoint> points, int dim, int n) {
  if (points.empty()) throw std::invalid_argument("empirical_fourier: empty point list");
  SpectralCoeffs c(dim, n);
  double w = 1.0 / static_cast<double>(points.size());
  if (dim == 1) {
    for (const auto& p : points) {
      // e^{-2 pi i k x} accumulated by repeated multiplication over k >= 0,
      // negative modes by conjugation.
      cplx step = std::polar(1.0, -kTwoPi * p[0]);
      cplx acc{1.0, 0.0};
      for (int k = 0; k <= n / 2; ++k) {
        if (k < n / 2) c.at(k) += w * acc;
        if (k > 0) c.at(-k) += w * std::conj(acc);
        acc *= step;
      }
    }
  } else {
    for (const auto& p : points) {
      for (int j1 = 0; j1 < n; ++j1) {
        int k1 = SpectralCoeffs::mode_of(j1, n);
        for (int j2 = 0; j2 < n; ++j2) {
          int k2 = SpectralCoeffs::mode_of(j2, n);
          c.modes[static_cast<std::size_t>(j1) * n + j2] +=
              w * std::polar(1.0, -kTwoPi * (k1 * p[0] + k2 * p[1]));
        }
      }
    }
  }
  return c;
}

double spectral_eval(const SpectralCoeffs& c, const TorusPoint& p) {
  cplx s{0.0, 0.0};
  for (std::size_t j = 0; j < c.size(); ++j) {
    auto k = c.mode_vec(j);
    s += c.modes[j] * std::polar(1.0, kTwoPi * (k[0] * p[0] + k[1] * p[1]));
  }
  return s.real();
}

std::vector<SpectralCoeffs> spectral_gradient_coeffs(const SpectralCoeffs& c) {
  std::vector<SpectralCoeffs> g(static_cast<std::size_t>(c.dim), SpectralCoeffs(c.dim, c.n));
  for (std::size_t j = 0; j < c.size(); ++j) {
    auto k = c.mode_vec(j);
    for (int a = 0; a < c.dim; ++a) {
      // odd derivative of the unpaired Nyquist mode is zeroed
      int ka = (k[a] == -c.n / 2) ? 0 : k[a];
      g[static_cast<std::size_t>(a)].modes[j] = cplx{0.0, kTwoPi * ka} * c.modes[j];
    }
  }
  return g;
}

std::vector<GridField> spectral_gradient(const GridField& f) {
  auto gc = spectral_gradient_coeffs(forward_transform(f));
  std::vector<GridField> g;
  g.reserve(gc.size());
  for (auto& c : gc) g.push_back(inverse_transform(c));
  return g;
}

void dealias(SpectralCoeffs& c) {
  int cut = c.n / 3;
  for (std::size_t j = 0; j < c.size(); ++j) {
    auto k = c.mode_vec(j);
    if (std::abs(k[0]) > cut || std::abs(k[1]) > cut) c.modes[j] = cplx{0.0, 0.0};
  }
}

double spectral_power(const SpectralCoeffs& c) {
  double s = 0.0;
  for (const auto& m : c.modes) s += std::norm(m);
  return s;
}

SpectralCoeffs convolve_coeffs(const SpectralCoeffs& a, const SpectralCoeffs& b) {
  if (a.dim != b.dim || a.n != b.n)
    throw std::invalid_argument("convolve_coeffs: shape mismatch");
  SpectralCoeffs out(a.dim, a.n);
  for (std::size_t j = 0; j < out.size(); ++j) out.modes[j] = a.modes[j] * b.modes[j];
  return out;
}

GridField convolve(const SpectralCoeffs& kernel_hat, const GridField& f) {
  return inverse_transform(convolve_coeffs(kernel_hat, forward_transform(f)));
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace mfl
