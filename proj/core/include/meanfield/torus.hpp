// Periodic geometry, uniform grids and discrete Fourier transforms on the
// unit torus in dimension 1 or 2. All fields live on uniform n^d grids with
// x_j = j/n; the transform convention is
//   c_k = (1/n^d) sum_j f(x_j) e^{-2 pi i k.x_j},   f(x) = sum_k c_k e^{2 pi i k.x},
// so c_0 is the mean of the field (= its integral over the unit torus) and
// Parseval reads sum_k |c_k|^2 = mean(f^2).
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace mfl {

using cplx = std::complex<double>;

// A point on the torus; only the first `dim` entries are meaningful.
using TorusPoint = std::array<double, 2>;

// Reduce a coordinate into [0,1).
double wrap1(double x);

// Canonical wrapping of a raw point. Throws on non-finite input.
TorusPoint wrap(std::span<const double> raw);
TorusPoint wrap(const TorusPoint& p, int dim);

// Minimal-image displacement a-b, each component in [-1/2, 1/2).
// The half-period tie is resolved to -1/2.
double torus_displacement1(double a, double b);
std::array<double, 2> torus_displacement(const TorusPoint& a, const TorusPoint& b, int dim);

double torus_norm(const std::array<double, 2>& r, int dim);

struct GridField {
  int dim = 1;
  int n = 0;                   // points per axis, even
  std::vector<double> values;  // n^dim entries, x2 fastest in 2-d

  GridField() = default;
  GridField(int dim_, int n_, double fill = 0.0);

  double h() const { return 1.0 / n; }
  std::size_t size() const { return values.size(); }

  double& at(int i) { return values[static_cast<std::size_t>(i)]; }
  double at(int i) const { return values[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }

  // Grid coordinates of the flat index.
  TorusPoint point(std::size_t flat) const;

  double mean() const;       // trapezoid quadrature = plain mean on the torus
  double min() const;
  double max() const;

  // Periodic multilinear interpolation at an arbitrary point.
  double interp(const TorusPoint& p) const;
};

struct SpectralCoeffs {
  int dim = 1;
  int n = 0;
  std::vector<cplx> modes;  // FFT layout: index j <-> signed mode (j<n/2 ? j : j-n)

  SpectralCoeffs() = default;
  SpectralCoeffs(int dim_, int n_);

  std::size_t size() const { return modes.size(); }

  // Signed mode <-> flat index helpers (per axis).
  static int mode_of(int j, int n) { return j < n / 2 ? j : j - n; }
  static int index_of(int k, int n) { return k >= 0 ? k : k + n; }

  cplx& at(int k);            // 1-d, signed mode
  cplx at(int k) const;
  cplx& at(int k1, int k2);   // 2-d, signed modes
  cplx at(int k1, int k2) const;

  // Squared Euclidean norm of the signed mode vector at flat index j.
  double mode_norm2(std::size_t j) const;
  std::array<int, 2> mode_vec(std::size_t j) const;
};

// DFT pair; n must be even and positive. Throws on invalid input.
SpectralCoeffs forward_transform(const GridField& f);
GridField inverse_transform(const SpectralCoeffs& c);

// Fourier coefficients of the empirical measure (1/N) sum_j delta_{x_j},
// truncated to modes with each component in [-n/2, n/2). Coefficient at 0 is 1.
SpectralCoeffs empirical_fourier(std::span<const TorusPoint> points, int dim, int n);

// Evaluate the trigonometric polynomial carried by `c` at an off-grid point.
double spectral_eval(const SpectralCoeffs& c, const TorusPoint& p);

// Spectral gradient: d components, Nyquist mode zeroed.
std::vector<GridField> spectral_gradient(const GridField& f);
std::vector<SpectralCoeffs> spectral_gradient_coeffs(const SpectralCoeffs& c);

// Zero every mode with any |k_axis| > n/3 (2/3-rule dealiasing).
void dealias(SpectralCoeffs& c);

// sum_k |c_k|^2 (left side of the Parseval identity).
double spectral_power(const SpectralCoeffs& c);

// Mode-wise product (periodic convolution theorem under this convention).
SpectralCoeffs convolve_coeffs(const SpectralCoeffs& a, const SpectralCoeffs& b);

// (kernel * f)(x) synthesized back to the grid.
GridField convolve(const SpectralCoeffs& kernel_hat, const GridField& f);

bool is_pow2(int n);

}  // namespace mfl
