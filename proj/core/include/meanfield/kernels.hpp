// Interaction potentials V on the torus, carried as paired grid/spectral
// tables with zero-mean normalization (the k=0 coefficient is always 0).
// Singular families (periodic-log, riesz, pks) are represented by their
// Fourier series truncated at the grid resolution; that truncation is the
// periodization. Families with a closed form additionally carry analytic
// evaluation used for pointwise potentials and forces.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "meanfield/torus.hpp"

namespace mfl {

enum class KernelFamily { PeriodicLog, Riesz, CosineTest, Pks, Tabulated };
enum class KernelSign { Repulsive, Attractive };
enum class SigmaMode { Vanishing, Fixed };

std::string family_name(KernelFamily f);
KernelFamily family_from_name(const std::string& s);

struct KernelMetadata {
  double k = 1.0;       // pointwise gradient exponent
  double kprime = 2.0;  // pointwise Hessian exponent
  double p = 2.0;       // L^p integrability exponent
  double alpha = 0.5;   // Fourier remainder exponent, 0 < alpha < d
  KernelSign sign = KernelSign::Repulsive;
  SigmaMode sigma_mode = SigmaMode::Fixed;
};

struct KernelSpec {
  KernelFamily family = KernelFamily::CosineTest;
  int dim = 1;
  int n = 0;
  double param = 0.0;  // s for riesz, lambda for pks
  GridField grid_table;          // = inverse_transform(spectral_table)
  SpectralCoeffs spectral_table;
  KernelMetadata meta;

  // Gradient tables, synthesized lazily by build_kernel. Closed-form families
  // do not use them for force evaluation.
  std::vector<GridField> grad_table;

  double r_min = 0.0;  // singularity guard for force evaluation, default h/2

  bool has_closed_form() const;
  bool is_singular() const;  // lim_{x->0} V = +infinity for the ideal kernel

  // Pointwise potential: analytic closed form when available, otherwise the
  // band-limited grid table interpolated.
  double eval_potential(const std::array<double, 2>& r) const;

  // Band-limited potential by direct mode summation (slow; oracle use).
  double eval_series(const std::array<double, 2>& r) const;

  double h() const { return 1.0 / n; }
};

struct ForceSample {
  std::array<double, 2> f{0.0, 0.0};
  bool capped = false;
};

// K(r) = -grad V(r). Displacements shorter than spec.r_min are evaluated at
// the guard radius and flagged.
ForceSample eval_force(const KernelSpec& spec, const std::array<double, 2>& r);

struct BuildParams {
  double s = 0.5;       // riesz exponent, 0 < s < dim
  double lambda = 1.0;  // pks intensity
  double sigma_for_mode = 1.0;  // used only to tag sigma_mode metadata
};

KernelSpec build_kernel(KernelFamily family, const BuildParams& params, int n, int dim = 1);

// Band-limit a kernel to a different grid size: modes inside the target band
// are copied, the rest dropped. Intended for smooth (regularized) kernels
// whose spectrum has decayed by the target band edge.
KernelSpec resample_kernel(const KernelSpec& spec, int n);

enum class HypStatus { Pass, Fail, NotApplicable };

struct HypEntry {
  HypStatus status = HypStatus::NotApplicable;
  double constant = 0.0;     // measured constant C
  double worst_location = 0.0;  // |x| (or |xi|) at which the max was attained
  int resolution = 0;
  std::string note;
};

struct HypothesisReport {
  std::map<std::string, HypEntry> entries;  // keys hyp01..hyp06, hyp001
  bool passed(const std::string& key) const;
};

HypothesisReport check_hypotheses(const KernelSpec& spec);

// CSV kernel table round trip. Layout: a header block of "key,value" lines
// (family, dim, n, param, metadata), a "values" section with n^d rows, then a
// "coeffs" section with n^d "re,im" rows in FFT index order.
void export_kernel_csv(const KernelSpec& spec, const std::string& path);
KernelSpec import_kernel_csv(const std::string& path);

}  // namespace mfl
